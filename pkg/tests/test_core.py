import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ifront.core import (
    EquilibriumKind,
    ModelParams,
    Regime,
    classify_equilibria,
    compute_rates,
    jacobian,
)

positive = st.floats(min_value=1e-3, max_value=50.0)
d_values = st.floats(min_value=1e-3, max_value=20.0).filter(
    lambda d: abs(d - 1.0) > 1e-6)


def test_rates_example_homogeneous():
    rt = compute_rates(ModelParams(2, 1, 2))
    assert rt.lam == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert rt.lambda_ == rt.lam
    assert rt.mu == pytest.approx(0.5, abs=1e-12)
    assert rt.gamma == pytest.approx(0.5, abs=1e-12)


def test_rates_example_degenerate_heterogeneous():
    rt = compute_rates(ModelParams(0.5, 1, 0.5))
    assert rt.lam == pytest.approx(0.5, abs=1e-12)
    assert rt.mu == pytest.approx(0.5, abs=1e-12)
    assert rt.degenerate


def test_rates_large_speed_no_cancellation():
    rt = compute_rates(ModelParams(2, 1, 1e8))
    # lambda ~ r / c for c >> sqrt(r)
    assert rt.lam == pytest.approx(1e-8, rel=1e-12)


@given(d=d_values, r=positive, c=positive)
def test_rate_identities(d, r, c):
    p = ModelParams(d, r, c)
    rt = compute_rates(p)
    k = r if p.regime is Regime.HOMOGENEOUS else d * r
    assert rt.lam * (rt.lam + c) == pytest.approx(k, rel=1e-12)
    assert rt.zeta * (rt.zeta + c) == pytest.approx(k, rel=1e-12)
    if p.regime is Regime.HOMOGENEOUS:
        assert rt.mu * c == pytest.approx(d - 1, rel=1e-12)
    else:
        assert rt.mu * c == pytest.approx(d * (1 - d), rel=1e-12)
    assert rt.lam > 0 and rt.mu > 0 and rt.gamma > 0 and rt.zeta < 0
    assert rt.eta == min(rt.lam, rt.mu)
    assert rt.gamma == pytest.approx(r / c, rel=1e-15)


@pytest.mark.parametrize("bad", [
    dict(d=1.0, r=1, c=1), dict(d=0.0, r=1, c=1), dict(d=2, r=-1, c=1),
    dict(d=2, r=1, c=0.0), dict(d=2, r=1, c=math.nan),
])
def test_params_rejected(bad):
    with pytest.raises(ValueError):
        ModelParams(**bad)


def test_regime_and_states():
    assert ModelParams(2, 1, 1).regime is Regime.HOMOGENEOUS
    het = ModelParams(0.3, 1, 1)
    assert het.regime is Regime.HETEROGENEOUS
    assert het.left_state == (pytest.approx(0.7), 1.0)
    assert het.right_state == (1.0, 0.0)
    assert het.with_speed(2.0).c == 2.0


def _by_point(reports):
    return {rep.point: rep for rep in reports}


def test_equilibria_examples():
    rep = _by_point(classify_equilibria(2, 1))
    assert rep[(0.0, 1.0)].kind is EquilibriumKind.STABLE_NODE
    assert rep[(0.0, 1.0)].eigenvalues == (-1.0, -1.0)
    assert rep[(0.0, 0.0)].kind is EquilibriumKind.UNSTABLE_NODE
    assert rep[(0.0, 0.0)].eigenvalues == (1.0, 1.0)
    rep = _by_point(classify_equilibria(0.5, 1))
    assert rep[(0.5, 1.0)].kind is EquilibriumKind.STABLE_NODE
    assert rep[(0.5, 1.0)].eigenvalues == (-0.5, -1.0)


def test_equilibria_reject_d_one():
    with pytest.raises(ValueError):
        classify_equilibria(1.0, 1.0)


@given(d=d_values, r=positive)
def test_eigenvalues_match_trace_and_determinant(d, r):
    for rep in classify_equilibria(d, r):
        J = jacobian(rep.point, d, r)
        l1, l2 = rep.eigenvalues
        assert l1 + l2 == pytest.approx(np.trace(J), abs=1e-12)
        assert l1 * l2 == pytest.approx(np.linalg.det(J), rel=1e-12, abs=1e-12)


def test_stability_exchange_across_d_one():
    below = _by_point(classify_equilibria(1 - 1e-3, 1))
    above = _by_point(classify_equilibria(1 + 1e-3, 1))
    assert below[(0.0, 1.0)].kind is EquilibriumKind.SADDLE
    assert above[(0.0, 1.0)].kind is EquilibriumKind.STABLE_NODE
    lo = [r for r in below.values() if r.point[0] > 0 and r.point[1] == 1.0][0]
    hi = [r for r in above.values() if r.point[0] < 0 and r.point[1] == 1.0][0]
    assert lo.kind is EquilibriumKind.STABLE_NODE
    assert hi.kind is EquilibriumKind.SADDLE
