import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import MIX, random_spec
from edident import EDModelSpec, Gaussian, ShockBlock, SpecError, build_loading_matrix, validate_identification_preconditions
from edident.families import CenteredGamma, FamilyError, Mixture, factor_from_dict
from edident.model import loading_matrix, shock_labels
from edident.simulate import components_from_shocks, draw_shocks


def _gauss_spec(T, a):
    return EDModelSpec.uniform(T, a, Gaussian(1.0), ShockBlock.gaussian_pair(1.0, 1.0))


def _row(L, t):
    return dict(zip(L.labels, L.A[t - 1]))


def test_q0_identity_like_loadings():
    L = build_loading_matrix(EDModelSpec(2, 0, (), (ShockBlock.gaussian_pair(1, 1),) * 2))
    assert L.labels == ("eta[1]", "xi[1]", "eta[2]", "xi[2]")
    np.testing.assert_array_equal(L.A, [[1, 1, 0, 0], [1, 0, 1, 1]])


def test_q1_two_period_structure():
    L = build_loading_matrix(_gauss_spec(2, [0.5]))
    assert _row(L, 1) == {"xi[0]": 0.5, "eta[1]": 1.0, "xi[1]": 1.0, "eta[2]": 0.0, "xi[2]": 0.0}
    assert _row(L, 2) == {"xi[0]": 0.0, "eta[1]": 1.0, "xi[1]": 0.5, "eta[2]": 1.0, "xi[2]": 1.0}


def test_q2_row_three_by_hand():
    r = _row(build_loading_matrix(_gauss_spec(5, [0.4, 0.7])), 3)
    assert r["xi[1]"] == 0.7 and r["xi[2]"] == 0.4 and r["xi[3]"] == 1.0
    assert r["eta[1]"] == r["eta[2]"] == r["eta[3]"] == 1.0
    assert r["xi[-1]"] == r["xi[0]"] == r["eta[4]"] == r["xi[4]"] == r["xi[5]"] == 0.0


@pytest.mark.parametrize("T,q,a", [(2, 2, (0.1, 0.2)), (3, 1, ()), (3, 1, (0.1, 0.2)), (0, 0, ()), (3, -1, ())])
def test_invalid_spec_rejected(T, q, a):
    with pytest.raises(SpecError):
        EDModelSpec(T, q, a, (ShockBlock.gaussian_pair(1, 1),) * (max(T, 0) + max(q, 0)))


def test_block_kinds_checked():
    with pytest.raises(SpecError):
        EDModelSpec(2, 1, (0.5,), (ShockBlock.gaussian_pair(1, 1),) * 3)


def test_bad_family_parameters():
    with pytest.raises(FamilyError):
        Mixture(1.2, 1, 1, 1)
    with pytest.raises(FamilyError):
        CenteredGamma(-1, 1)
    with pytest.raises(FamilyError):
        factor_from_dict({"family": "cauchy"})
    with pytest.raises(SpecError):
        ShockBlock.gaussian_pair(1.0, 1.0, 2.0)


def test_shock_labels_order():
    assert shock_labels(2, 2) == ["xi[-1]", "xi[0]", "eta[1]", "xi[1]", "eta[2]", "xi[2]"]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_loading_invariants_random(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    L = build_loading_matrix(spec)
    T, q = spec.T, spec.q
    assert L.A.shape == (T, q + 2 * T)
    coef = spec.coefficients
    for t in range(1, T + 1):
        for tau in range(1 - q, T + 1):
            lag = t - tau
            want = coef[lag] if 0 <= lag <= q else 0.0
            assert L.A[t - 1, spec.xi_col(tau)] == want
        for tau in range(1, T + 1):
            assert L.A[t - 1, spec.eta_col(tau)] == (1.0 if tau <= t else 0.0)
    if q == 0 or spec.a[-1] != 0:
        assert np.linalg.matrix_rank(L.A) == T


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_recursion_equals_loading_map(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    theta = draw_shocks(spec, 50, seed)
    v, w = components_from_shocks(spec, theta)
    np.testing.assert_allclose(v + w, theta @ build_loading_matrix(spec).A.T, rtol=0, atol=1e-12)


def test_spec_is_immutable(dependent_q1):
    with pytest.raises(Exception):
        dependent_q1.T = 7
    with pytest.raises(ValueError):
        build_loading_matrix(dependent_q1).A[0, 0] = 3.0


def test_preconditions_t1_pass(dependent_q1):
    rep = validate_identification_preconditions(dependent_q1, "T1")
    assert rep.ok, rep.failed


def test_preconditions_t1_coefficient_exclusion():
    spec = EDModelSpec.uniform(4, [1.0], MIX, ShockBlock.independent_pair(Gaussian(1.0), MIX))
    rep = validate_identification_preconditions(spec, "T1")
    # with q = 1, a_1 is also a_q
    assert [c.name for c in rep.failed] == ["a_1 not in {0.0, 1.0}", "a_q not in {0.0, 1.0}"]


def test_preconditions_l1_short_panel():
    spec = EDModelSpec.uniform(3, [0.2, 0.3], MIX, ShockBlock.independent_pair(Gaussian(1.0), MIX))
    rep = validate_identification_preconditions(spec, "L1")
    assert rep.ok
    assert any("q + 2" in n for n in rep.notes)


def test_preconditions_l1_dependence_and_gaussianity(dependent_q1, gaussian_q1):
    assert "eta_1 and xi_1 independent" in [c.name for c in validate_identification_preconditions(dependent_q1, "L1").failed]
    assert "xi_1 nongaussian" in [c.name for c in validate_identification_preconditions(gaussian_q1, "L1").failed]
    rep = validate_identification_preconditions(gaussian_q1, "T2")
    assert rep.ok


def test_preconditions_interior_coefficient_note():
    spec = EDModelSpec.uniform(7, [0.4, 1.0, 0.6], Gaussian(1.0), ShockBlock.independent_pair(Gaussian(1.0), MIX))
    rep = validate_identification_preconditions(spec, "T1")
    assert rep.ok and any("interior" in n for n in rep.notes)


def test_unknown_theorem():
    with pytest.raises(ValueError):
        validate_identification_preconditions(_gauss_spec(3, [0.5]), "T9")


def test_loading_matrix_function_matches_spec_path():
    spec = _gauss_spec(5, [0.4, 0.7])
    np.testing.assert_array_equal(loading_matrix(5, 2, [0.4, 0.7]), build_loading_matrix(spec).A)
