from __future__ import annotations

import math

import numpy as np
import pytest

from aggseek.equilibrium import EquilibriumResult, solve_equilibrium
from aggseek.flow import IntegratorConfig, Trajectory, integrate
from aggseek.geometry import Box, tangent_project
from aggseek.lyapunov import (
    CertificateReport,
    assemble_M,
    check_condition_5,
    compare_conditions,
    decay_report,
    lyapunov_W,
    norm_inf,
    reduced_lambda_min,
    storage_inequality_check,
)
from aggseek.model import GameSpec, QuadraticCost, SystemState, grad_f, initial_state

from helpers import (
    demand_response_game,
    random_game,
    random_point_in,
    single_agent_game,
    small_certified_game,
)


def boxes_game(ell: float, C: float, k: float, N: int) -> GameSpec:
    cost = QuadraticCost(ell, np.array([0.5]), np.array([0.0]))
    box = Box(np.array([0.0]), np.array([1.0]))
    return GameSpec(n=1, N=N, C=np.array([[C]]), k=k, agents=tuple((cost, box) for _ in range(N)))


def synthetic_reference(n: int = 1, N: int = 1) -> EquilibriumResult:
    return EquilibriumResult(
        xbar=np.zeros((N, n)),
        sigmabar=np.zeros(n),
        iterations=0,
        final_update_norm=0.0,
        vi_gap_value=0.0,
    )


def synthetic_trajectory(times: np.ndarray, W: np.ndarray) -> Trajectory:
    # park all the energy in sigma so the recomputed W matches exactly
    sigma = np.sqrt(2.0 * W)[:, None]
    m = times.shape[0]
    return Trajectory(
        times=times,
        x=np.zeros((m, 1, 1)),
        sigma=sigma,
        W=W.copy(),
        residual=np.zeros(m),
        dist_avg=np.zeros(m),
        dist_sigma=np.abs(sigma[:, 0]),
        has_reference=True,
    )


def synthetic_certificate(lam_sym: float) -> CertificateReport:
    return CertificateReport(
        cond5_holds=True,
        cond5_margin=1.0,
        gershgorin_rhs=0.0,
        prior_holds=True,
        prior_margin=1.0,
        strictly_monotone=True,
        lambda_min_paper=lam_sym,
        lambda_min_symmetrized=lam_sym,
    )


def test_norm_inf_examples() -> None:
    assert norm_inf(np.array([[1.0, -2.0], [3.0, 4.0]])) == 7.0
    assert norm_inf(np.array([[2.0]])) == 2.0
    assert norm_inf(np.zeros((3, 3))) == 0.0


def test_condition_margin_examples() -> None:
    C = np.array([[1.0]])
    holds, margin = check_condition_5(1.5, 0.6, C, 100)
    assert holds and margin == pytest.approx(0.097, abs=1e-12)
    holds, margin = check_condition_5(1.5, 0.2, C, 100)
    assert not holds and margin == pytest.approx(-0.301, abs=1e-12)
    holds, margin = check_condition_5(1.5, 0.4, C, 100)
    assert not holds and margin == pytest.approx(-0.102, abs=1e-12)
    holds, margin = check_condition_5(1.0, 1.0, np.zeros((1, 1)), 2)
    assert holds and margin == pytest.approx(0.75)


def test_condition_check_validates_inputs() -> None:
    with pytest.raises(ValueError):
        check_condition_5(0.0, 1.0, np.eye(1), 3)
    with pytest.raises(ValueError):
        check_condition_5(1.0, -1.0, np.eye(1), 3)
    with pytest.raises(ValueError):
        check_condition_5(1.0, 1.0, np.eye(1), 0)


def test_condition_margin_nondecreasing_in_population() -> None:
    C = np.array([[0.8]])
    margins = [check_condition_5(1.2, 0.9, C, N)[1] for N in range(1, 11)]
    assert all(b >= a for a, b in zip(margins, margins[1:]))


def test_certificate_matrix_structure() -> None:
    game = boxes_game(ell=1.3, C=0.4, k=0.7, N=3)
    M, lam = assemble_M(game, "symmetrized")
    assert M.shape == (4, 4)
    assert np.array_equal(M, M.T)
    assert M[:3, :3] == pytest.approx(1.3 * np.eye(3))
    assert M[3, 3] == pytest.approx(0.7)
    # symmetrized off-diagonal block: 0.5 * (C - (k/N) I)
    expected_B = 0.5 * (0.4 - 0.7 / 3)
    assert M[0, 3] == pytest.approx(expected_B)
    assert M[1, 3] == pytest.approx(expected_B)
    assert lam == pytest.approx(float(np.linalg.eigvalsh(M)[0]), abs=0.0)

    Mp, _ = assemble_M(game, "paper")
    assert Mp[0, 3] == pytest.approx(-0.5 * (0.4 + 0.7 / 3))


def test_certificate_matrix_rejects_unknown_variant() -> None:
    game = single_agent_game()
    with pytest.raises(ValueError):
        assemble_M(game, "bogus")
    with pytest.raises(ValueError):
        reduced_lambda_min(game, "")


def test_certificate_eigenvalue_decoupled_closed_form() -> None:
    game = boxes_game(ell=1.0, C=0.0, k=1.0, N=2)
    expected = 1.0 - math.sqrt(0.125)
    for variant in ("paper", "symmetrized"):
        _, lam = assemble_M(game, variant)
        assert lam == pytest.approx(expected, abs=1e-12)
        assert reduced_lambda_min(game, variant) == pytest.approx(expected, abs=1e-12)


def test_certificate_eigenvalue_pinned_values(demand_game: GameSpec) -> None:
    _, lam_sym = assemble_M(demand_game, "symmetrized")
    _, lam_paper = assemble_M(demand_game, "paper")
    assert lam_sym == pytest.approx(-3.940330650367767, abs=1e-9)
    assert lam_paper == pytest.approx(-4.000089108124729, abs=1e-9)

    single = single_agent_game()
    _, s_sym = assemble_M(single, "symmetrized")
    _, s_paper = assemble_M(single, "paper")
    assert s_sym == pytest.approx(0.5575571099101947, abs=1e-12)
    assert s_paper == pytest.approx(0.13212201246570893, abs=1e-12)

    _, lam5 = assemble_M(small_certified_game(7), "symmetrized")
    assert lam5 == pytest.approx(0.5994447869572479, abs=1e-12)


def test_reduced_route_matches_dense() -> None:
    rng = np.random.default_rng(21)
    for _ in range(30):
        game = random_game(rng, n_choices=(1, 2, 3), max_agents=40)
        for variant in ("paper", "symmetrized"):
            _, dense = assemble_M(game, variant)
            assert abs(reduced_lambda_min(game, variant) - dense) <= 1e-10


def test_certificate_eigenvalue_lower_bound() -> None:
    rng = np.random.default_rng(22)
    for _ in range(40):
        game = random_game(rng, n_choices=(1, 2), max_agents=30)
        for variant in ("paper", "symmetrized"):
            sign = -0.5 if variant == "paper" else 0.5
            B = sign * (game.C + (-1 if variant == "symmetrized" else 1) * (game.k / game.N) * np.eye(game.n))
            bound = min(game.ell_min, game.k) - math.sqrt(game.N) * float(np.linalg.norm(B, 2))
            _, lam = assemble_M(game, variant)
            assert lam >= bound - 1e-12


def test_compare_conditions_demand_scenario(demand_game: GameSpec) -> None:
    report = compare_conditions(demand_game)
    assert report.cond5_holds
    assert report.cond5_margin == pytest.approx(0.097, abs=1e-12)
    assert report.gershgorin_rhs == pytest.approx(0.503, abs=1e-12)
    assert report.prior_holds
    assert report.prior_margin == pytest.approx(0.5, abs=1e-12)
    assert report.strictly_monotone
    assert report.lambda_min_symmetrized < 0


def test_compare_conditions_separates_old_and_new() -> None:
    # weaker curvature: the spectral prior fails while the gain condition holds
    report = compare_conditions(boxes_game(ell=0.9, C=1.0, k=0.6, N=100))
    assert not report.prior_holds
    assert report.prior_margin == pytest.approx(-0.1, abs=1e-12)
    assert report.cond5_holds
    assert report.cond5_margin == pytest.approx(0.097, abs=1e-12)


def test_compare_conditions_flags_nonmonotone_coupling() -> None:
    game = single_agent_game()
    loose = GameSpec(n=1, N=1, C=np.array([[-2.0]]), k=game.k, agents=game.agents)
    report = compare_conditions(loose)
    assert not report.strictly_monotone


def test_lyapunov_value_examples(single_ref: EquilibriumResult) -> None:
    at_ref = SystemState(x=single_ref.xbar.copy(), sigma=single_ref.sigmabar.copy())
    assert lyapunov_W(at_ref, single_ref) == 0.0
    off = SystemState(x=np.array([[0.5]]), sigma=np.array([0.5]))
    assert lyapunov_W(off, single_ref) == pytest.approx(0.0625)
    twice = SystemState(x=np.array([[0.75]]), sigma=np.array([0.75]))
    assert lyapunov_W(twice, single_ref) == pytest.approx(4 * 0.0625)


def test_storage_inequality_at_equilibrium_input(
    demand_game: GameSpec, demand_ref: EquilibriumResult
) -> None:
    rng = np.random.default_rng(23)
    ubar = -(demand_game.C @ demand_ref.sigmabar)
    for _ in range(20):
        x = np.stack([random_point_in(rng, demand_game.constraint(i)) for i in range(demand_game.N)])
        state = SystemState(x=x, sigma=demand_ref.sigmabar.copy())
        u = np.tile(ubar, (demand_game.N, 1))
        assert storage_inequality_check(demand_game, state, u, demand_ref)


def test_storage_inequality_active_bound(single_ref: EquilibriumResult) -> None:
    game = single_agent_game()
    state = SystemState(x=np.array([[0.25]]), sigma=np.array([0.5]))
    u = np.array([[-0.5]])
    assert storage_inequality_check(game, state, u, single_ref)


def test_storage_inequality_random_inputs() -> None:
    rng = np.random.default_rng(24)
    for _ in range(30):
        game = random_game(rng, max_agents=6)
        ref = solve_equilibrium(game)
        for _ in range(10):
            x = np.stack([random_point_in(rng, game.constraint(i)) for i in range(game.N)])
            state = SystemState(x=x, sigma=rng.normal(size=game.n))
            u = rng.normal(scale=2.0, size=(game.N, game.n))
            assert storage_inequality_check(game, state, u, ref)


def test_storage_inequality_sign_is_load_bearing() -> None:
    # flipping the input difference on the right-hand side breaks the inequality
    game = single_agent_game(lo=-10.0, hi=10.0)
    ref = solve_equilibrium(game)
    x = ref.xbar + 0.5
    state = SystemState(x=x, sigma=ref.sigmabar.copy())
    ubar = -(game.C @ ref.sigmabar)
    u = ubar + 1.0

    assert storage_inequality_check(game, state, u[None, :], ref)

    cost, cset = game.agents[0]
    dx = (x - ref.xbar)[0]
    gx = grad_f(cost, x[0])
    gxbar = grad_f(cost, ref.xbar[0])
    lhs = float(dx @ tangent_project(cset, x[0], -gx + u))
    flipped_rhs = -float(dx @ (gx - gxbar + u - ubar))
    assert lhs > flipped_rhs + 1e-9


def test_decay_report_certified_run() -> None:
    game = small_certified_game(7)
    ref = solve_equilibrium(game)
    cert = compare_conditions(game)
    assert cert.lambda_min_symmetrized > 0
    traj = integrate(game, initial_state(game), IntegratorConfig(h=1e-3, T=10.0, record_every=100), reference=ref)
    report = decay_report(traj, ref, cert)
    assert report.W0 > 0
    assert report.monotone
    assert report.certificate_rate == pytest.approx(cert.lambda_min_symmetrized)
    assert report.certified is True
    assert report.fitted_rate > cert.lambda_min_symmetrized


def test_decay_report_exact_equilibrium_start() -> None:
    cost_a = QuadraticCost(1.0, np.array([0.4]), np.array([0.0]))
    cost_b = QuadraticCost(1.0, np.array([0.6]), np.array([0.0]))
    box = Box(np.array([0.0]), np.array([1.0]))
    game = GameSpec(n=1, N=2, C=np.zeros((1, 1)), k=1.0, agents=((cost_a, box), (cost_b, box)))
    ref = solve_equilibrium(game)
    assert np.array_equal(ref.xbar, np.array([[0.4], [0.6]]))
    cert = compare_conditions(game)
    init = SystemState(x=ref.xbar.copy(), sigma=ref.sigmabar.copy())
    traj = integrate(game, init, IntegratorConfig(h=0.01, T=0.1), reference=ref)
    report = decay_report(traj, ref, cert)
    assert report.W0 == 0.0
    assert report.monotone
    assert math.isnan(report.fitted_rate)
    assert report.certified is True


def test_decay_report_fitted_rate_recovers_synthetic_slope() -> None:
    times = np.linspace(0.0, 5.0, 200)
    rho = 0.8
    W = 0.3 * np.exp(-rho * times)
    traj = synthetic_trajectory(times, W)
    ref = synthetic_reference()
    report = decay_report(traj, ref, synthetic_certificate(0.5))
    assert report.fitted_rate == pytest.approx(rho, rel=1e-6)
    assert report.monotone
    assert report.certified is True

    # a certificate rate faster than the actual decay must fail the envelope
    report_fast = decay_report(traj, ref, synthetic_certificate(1.5))
    assert report_fast.certified is False


def test_decay_report_full_window_fallback_when_never_halving() -> None:
    times = np.linspace(0.0, 1.0, 50)
    rho = 0.05
    W = 1.0 * np.exp(-rho * times)
    assert W[-1] > 0.5 * W[0]
    report = decay_report(synthetic_trajectory(times, W), synthetic_reference(), synthetic_certificate(0.01))
    assert report.fitted_rate == pytest.approx(rho, rel=1e-6)


def test_decay_report_skips_certificate_when_uncertified(demand_game: GameSpec) -> None:
    ref = solve_equilibrium(demand_game)
    cert = compare_conditions(demand_game)
    assert cert.lambda_min_symmetrized < 0
    traj = integrate(demand_game, initial_state(demand_game), IntegratorConfig(h=1e-3, T=1.0, record_every=10), reference=ref)
    report = decay_report(traj, ref, cert)
    assert report.certificate_rate is None
    assert report.certified is None
    assert report.W0 > 0


def test_decay_report_guards() -> None:
    times = np.linspace(0.0, 1.0, 20)
    W = np.exp(-times)
    traj = synthetic_trajectory(times, W)
    bad_ref = EquilibriumResult(
        xbar=np.zeros((1, 1)), sigmabar=np.zeros(1),
        iterations=0, final_update_norm=0.0, vi_gap_value=1e-3,
    )
    with pytest.raises(ValueError):
        decay_report(traj, bad_ref, synthetic_certificate(0.1))

    short = synthetic_trajectory(times[:5], W[:5])
    with pytest.raises(ValueError):
        decay_report(short, synthetic_reference(), synthetic_certificate(0.1))
