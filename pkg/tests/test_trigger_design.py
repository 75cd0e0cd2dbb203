import dataclasses
import math

import numpy as np
import pytest
from scipy.linalg import block_diag
from hypothesis import given, settings, strategies as st

from etc_consensus.errors import (
    AllEpsilonInfeasible,
    EpsilonOutOfRange,
    Infeasible,
    NonPositiveProduct,
    SigmaTooLarge,
)
from etc_consensus.report import load_design, design_report, dumps
from etc_consensus.trigger_design import (
    Alphas,
    beta_min,
    beta_of,
    build_coupling_matrices,
    compute_alphas,
    default_eps_grid,
    delta_star,
    design_triggering,
    eta_star,
    f_of,
    max_sigma,
    rho_hat,
    rho_lower,
    solve_omega_sdp,
)

PUBLISHED_OMEGA = np.array([[0.0286, 0.0372], [0.0372, 0.0964]])


def rho_lower_vec(sigma, a_s, a_su, a_g, eps):
    """Vectorized certified ratio written from the optimal-eta/delta formulas."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.sqrt(sigma * a_s)
        beta = sigma / (1 - ra) ** 2
        den = 1 - eps - a_g * beta
        out = (1 + np.sqrt(a_su * beta)) ** 2 / den
    return np.where((ra < 1) & (den > 0), out, np.inf)


@pytest.fixture(scope="module")
def coupling(oscillator):
    sc, design = oscillator
    return build_coupling_matrices(design, sc.network, sc.dynamics, 0.038)


def test_closed_forms_hand_values():
    eta, b = eta_star(0.25, 1.0)
    assert eta == pytest.approx(1.0) and b == pytest.approx(1.0)
    assert beta_of(0.25, 1.0, 1.0) == pytest.approx(1.0)
    d, f = delta_star(4.0, 1.0)
    assert d == 2.0 and f == 9.0
    assert f_of(2.0, 4.0, 1.0) == pytest.approx(9.0)
    assert beta_min(0.0, 3.0) == 0.0
    with pytest.raises(SigmaTooLarge):
        eta_star(1.0, 1.0)
    with pytest.raises(NonPositiveProduct):
        delta_star(0.0, 1.0)


def test_eta_star_against_dense_scan():
    for sigma, a_s in [(1e-3, 50.0), (0.1, 2.0), (8.985e-6, 2284.7)]:
        eta, b = eta_star(sigma, a_s)
        etas = np.geomspace(1e-6, 1e6, 200001)
        den = 1 - sigma * (1 + 1 / etas) * a_s
        vals = np.where(den > 0, sigma * (1 + etas) / den, np.inf)
        assert b <= vals.min() * (1 + 1e-12)
        assert b == pytest.approx(vals.min(), rel=1e-6)


def test_rho_hat_reduces_to_rho_lower():
    al = Alphas(2284.7, 282.2, 2284.7)
    sigma, eps = 8.9e-6, 0.038
    eta, beta = eta_star(sigma, al.S)
    delta, _ = delta_star(al.S_u, beta)
    assert rho_hat(sigma, eps, eta, delta, al) == pytest.approx(rho_lower(sigma, al, eps), rel=1e-13)
    assert rho_hat(sigma, eps, eta * 2, delta, al) > rho_lower(sigma, al, eps)
    assert rho_lower(1.0, al, eps) == math.inf
    assert rho_lower(0.0, al, eps) == pytest.approx(1 / (1 - eps))


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1e3), st.floats(1e-3, 0.999), st.floats(1e-4, 1e3), st.floats(0, 0.9))
def test_rho_lower_monotone_in_sigma(a_s, frac, a_g, eps):
    al = (a_s, 0.5 * a_s, a_g)
    s2 = frac / a_s
    s1 = s2 * 0.7
    assert rho_lower(s1, al, eps) <= rho_lower(s2, al, eps)


def test_max_sigma_matches_grid_scan():
    # synthetic constants: alpha_S = alpha_Su = alpha_GammaU = 1, eps = 0.05, rho = 2
    sigma = max_sigma((1.0, 1.0, 1.0), 0.05, 2.0)
    step = 1e-7
    best = 0.0
    for start in np.arange(0.0, 1.0, 0.1):
        s = start + step * np.arange(1, 1_000_001)
        ok = s[rho_lower_vec(s, 1.0, 1.0, 1.0, 0.05) <= 2.0]
        if ok.size:
            best = max(best, ok.max())
    assert abs(sigma - best) <= step
    assert rho_lower(sigma, (1, 1, 1), 0.05) <= 2.0


def test_max_sigma_infeasible_and_out_of_range():
    with pytest.raises(Infeasible):
        max_sigma((1.0, 1.0, 1.0), 0.2, 1.2)
    with pytest.raises(EpsilonOutOfRange):
        max_sigma((1.0, 1.0, 1.0), 1.5, 1.2)


def test_default_grid():
    g = default_eps_grid(1.2)
    assert len(g) == 40 and g[0] == pytest.approx(1e-3)
    assert g[-1] == pytest.approx(0.98 * (1 - 1 / 1.2))
    assert np.all(np.diff(np.log(g)) == pytest.approx(np.log(g[1] / g[0])))


def test_coupling_matrices_structure(oscillator, coupling):
    sc, _ = oscillator
    cm = coupling
    ones = np.kron(np.ones(8), [1.0, 0.0])
    for m in (cm.S, cm.S_u, cm.Gamma_U):
        np.testing.assert_array_equal(m, m.T)
        assert np.linalg.eigvalsh(m)[0] >= -1e-9 * np.abs(m).max()
        np.testing.assert_allclose(m @ ones, 0, atol=1e-9 * np.abs(m).max())
    # S restricted to the disagreement subspace, mode by mode
    u = np.kron(sc.network.modal_basis, np.eye(2))
    modal = u.T @ cm.Gamma_U @ u
    np.testing.assert_allclose(modal[2:4, 2:4], cm.Gamma_modes[0], rtol=1e-10, atol=1e-10)
    with pytest.raises(EpsilonOutOfRange):
        build_coupling_matrices(oscillator[1], sc.network, sc.dynamics, 0.0)


def test_sdp_normalization_and_binding_alpha(coupling):
    omegas, kappa = solve_omega_sdp(coupling, 2, 8)
    assert sum(np.trace(o) for o in omegas) == pytest.approx(1.0, abs=1e-12)
    al = compute_alphas(coupling, omegas)
    assert max(al.as_tuple()) == pytest.approx(kappa, rel=1e-2)
    x = kappa * block_diag(*omegas)
    for m in (coupling.S, coupling.S_u, coupling.Gamma_U):
        assert np.linalg.eigvalsh(x - m)[0] >= -1e-8 * np.abs(m).max()
    assert all(np.linalg.eigvalsh(o)[0] > 0 for o in omegas)


def test_sdp_optimum_beats_published_weights(coupling):
    omegas, kappa = solve_omega_sdp(coupling, 2, 8)
    published_kappa = max(compute_alphas(coupling, [PUBLISHED_OMEGA] * 8).as_tuple())
    assert kappa < published_kappa


@pytest.mark.xfail(strict=True, reason="published weights give rho_lower = 1.192 here; see notes")
def test_published_parameters_give_published_ratio(coupling):
    al = compute_alphas(coupling, [PUBLISHED_OMEGA] * 8)
    assert rho_lower(8.985e-6, al, 0.038) == pytest.approx(1.1999, abs=0.005)


def test_oscillator_design(osc_params):
    tp = osc_params
    grid = default_eps_grid(1.2)
    i = int(np.argmin(abs(grid - 0.038)))
    assert abs(np.searchsorted(grid, tp.epsilon) - i) <= 1
    assert tp.sigma == pytest.approx(8.985e-6, rel=0.1)
    assert 1.0 < tp.rho_lower <= 1.2
    assert all(tp.certificate().values())
    assert tp.sigma < 1 / tp.alpha_S
    assert 1 - tp.epsilon - tp.alpha_GammaU * tp.beta > 0
    feasible = [r for r in tp.table if r.feasible]
    assert tp.sigma == max(r.sigma for r in feasible)
    assert tp.epsilon == min(r.epsilon for r in feasible if r.sigma == tp.sigma)


def test_large_rho_target_succeeds(oscillator):
    sc, design = oscillator
    tp = design_triggering(design, sc.network, sc.dynamics, 100.0, eps_grid=[0.1, 0.5, 0.9])
    assert tp.rho_lower <= 100.0
    assert tp.sigma * tp.alpha_S < 1
    al = (tp.alpha_S, tp.alpha_Su, tp.alpha_GammaU)
    assert rho_lower(tp.sigma * (1 + 1e-6), al, tp.epsilon) > 100.0


def test_all_epsilon_infeasible(oscillator):
    sc, design = oscillator
    with pytest.raises(AllEpsilonInfeasible):
        design_triggering(design, sc.network, sc.dynamics, 1.2, eps_grid=[0.5])
    with pytest.raises(Infeasible):
        design_triggering(design, sc.network, sc.dynamics, 1.0)


def test_report_round_trip(tmp_path, oscillator, osc_params):
    path = tmp_path / "design.json"
    path.write_text(dumps(design_report(oscillator[1], osc_params)))
    data, tp = load_design(path)
    for f in dataclasses.fields(tp):
        a, b = getattr(tp, f.name), getattr(osc_params, f.name)
        if f.name == "omegas":
            assert all(np.array_equal(x, y) for x, y in zip(a, b))
        elif f.name != "table":
            assert a == b, f.name
    assert data["certificate"]["certified"] is True
    assert len(data["epsilon_table"]) == 40
