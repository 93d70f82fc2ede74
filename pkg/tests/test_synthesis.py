import numpy as np
import pytest

from oracles import taylor_expm, taylor_gamma
from rrobserver import (
    Certificate,
    GainSchedule,
    IllConditionedCertificateError,
    InvalidProblemError,
    PlantModel,
    SynthesisProblem,
    assemble_lmis,
    build_script_matrices,
    closed_loop_matrix,
    design_observer,
    recover_gains,
    solve_feasibility,
    verify_certificate,
)
from rrobserver.matexp import spectral_radius
from rrobserver.solvers import FEASIBLE, UNDECIDED, BackendResult
from rrobserver.synthesis import (
    GAIN_IDENTITY_RTOL,
    MatrixConstraint,
    P_key,
    constraint_margin,
    gain_identity_residual,
)


def scalar_problem(lam, d_bar=0):
    return SynthesisProblem(PlantModel([[0.0]], [[1.0]]), 1.0, d_bar, lam)


def random_values(system, rng):
    out = {}
    for key, spec in system.variables.items():
        v = rng.normal(size=spec.shape)
        out[key] = (v + v.T) / 2 if spec.symmetric else v
    return out


# -- script matrices ------------------------------------------------------------


def test_scripts_zero_dynamics():
    s = build_script_matrices(np.zeros((2, 2)), 1.0, 1)
    np.testing.assert_allclose(s.A_d[0], np.eye(2))
    np.testing.assert_allclose(s.A_d[1], np.eye(2))
    np.testing.assert_allclose(s.Gamma, np.eye(2))
    np.testing.assert_allclose(s.T_d[1], np.hstack([np.eye(2), np.eye(2)]))


def test_scripts_d0_stack_is_gamma(A_bench):
    s = build_script_matrices(A_bench, 0.02, 0)
    np.testing.assert_array_equal(s.T_d[0], s.Gamma)
    np.testing.assert_allclose(s.A_d[0], taylor_expm(A_bench, 0.02), rtol=1e-12)


def test_scripts_per_block_oracle(A_bench):
    T = 0.02
    s = build_script_matrices(A_bench, T, 2)
    G = taylor_gamma(A_bench, T)
    T2 = s.T_d[2]
    for k in range(3):
        block = T2[:, 4 * k : 4 * (k + 1)]
        expected = G @ taylor_expm(A_bench, (2 - k) * T) if k < 2 else G
        np.testing.assert_allclose(block, expected, rtol=1e-11, atol=1e-15)


# -- assembly ---------------------------------------------------------------------


@pytest.mark.parametrize("p, d_bar, n_decrease, n_pos", [(2, 0, 2, 2), (2, 4, 50, 10), (1, 3, 16, 4)])
def test_constraint_counts(p, d_bar, n_decrease, n_pos):
    plant = PlantModel(np.eye(3)[:3] * 0.1, np.eye(3)[:p])
    problem = SynthesisProblem(plant, 0.1, d_bar, 5.0)
    system = assemble_lmis(problem, build_script_matrices(plant.A, 0.1, d_bar))
    assert len(system.decrease_constraints) == n_decrease
    assert len(system.positivity_constraints) == n_pos


def test_single_channel_couples_to_itself():
    problem = scalar_problem(2.0, d_bar=2)
    system = assemble_lmis(problem, build_script_matrices([[0.0]], 1.0, 2))
    pairs = {(c.index[1], c.index[2]) for c in system.decrease_constraints}
    assert pairs == {(d, e) for d in range(3) for e in range(3)}


def test_zero_lambda_rejected():
    with pytest.raises(InvalidProblemError):
        scalar_problem(0.0)


def test_block_layout_matches_formula(A_bench, C_bench, rng):
    plant = PlantModel(A_bench, C_bench)
    lam = 3.0
    problem = SynthesisProblem(plant, 0.05, 1, lam)
    scripts = build_script_matrices(A_bench, 0.05, 1)
    system = assemble_lmis(problem, scripts)
    vals = random_values(system, rng)
    con = next(c for c in system.decrease_constraints if c.index == (2, 1, 0))
    P, X, G = vals[("P", 2, 1)], vals[("X", 2, 1)], vals[("G", 2, 1)]
    Pn = vals[("P", 1, 0)]  # wraparound: channel 2 couples to channel 1
    Z = X @ scripts.A_d[1] - G @ C_bench[1:2]
    ul = -P + Z + Z.T
    ll = -X.T + lam * Z
    lr = Pn - lam * (X + X.T)
    np.testing.assert_allclose(con.evaluate(vals), np.block([[ul, ll.T], [ll, lr]]))


def test_assembly_is_linear(A_bench, C_bench, rng):
    plant = PlantModel(A_bench, C_bench)
    problem = SynthesisProblem(plant, 0.02, 2, 20.0)
    system = assemble_lmis(problem, build_script_matrices(A_bench, 0.02, 2))
    vals = random_values(system, rng)
    doubled = {k: 2 * v for k, v in vals.items()}
    for con in system.constraints:
        np.testing.assert_allclose(con.evaluate(doubled), 2 * con.evaluate(vals), rtol=1e-12)


def test_concentrated_equals_round_robin_for_one_output(rng):
    A = rng.normal(size=(3, 3))
    plant = PlantModel(A, rng.normal(size=(1, 3)))
    scripts = build_script_matrices(A, 0.1, 2)
    rr = assemble_lmis(SynthesisProblem(plant, 0.1, 2, 4.0, "round-robin"), scripts)
    cc = assemble_lmis(SynthesisProblem(plant, 0.1, 2, 4.0, "concentrated"), scripts)
    assert rr.variables == cc.variables
    vals = random_values(rr, rng)
    for a, b in zip(rr.constraints, cc.constraints):
        assert a.index == b.index
        np.testing.assert_array_equal(a.evaluate(vals), b.evaluate(vals))


# -- scalar hand analysis ----------------------------------------------------------
# n = p = 1, A = 0, T = 1, d_bar = 0: Gamma = 1 and the error map is m = 1 - L.
# With G = X (1 - m) the single block is
#   [[-P + 2 X m, X (lam m - 1)], [X (lam m - 1), P - 2 lam X]].
# For lam = 1 its determinant is -(X (1 + m) - P)^2 <= 0, so no strict solution
# exists; any |lam| > 1 admits one (e.g. lam = 2, m = 0, X = P = 1).


def test_scalar_lambda_one_determinant_identity(rng):
    problem = scalar_problem(1.0)
    system = assemble_lmis(problem, build_script_matrices([[0.0]], 1.0, 0))
    block = system.decrease_constraints[0]
    for _ in range(50):
        P, X, m = rng.uniform(0.1, 3), rng.normal(), rng.uniform(-1, 1)
        vals = {("P", 1, 0): np.array([[P]]), ("X", 1, 0): np.array([[X]]),
                ("G", 1, 0): np.array([[X * (1 - m)]])}
        det = np.linalg.det(block.evaluate(vals))
        assert det == pytest.approx(-(X * (1 + m) - P) ** 2, abs=1e-12)


def test_scalar_lambda_one_has_no_certificate():
    result = design_observer(scalar_problem(1.0))
    assert result.verdict != FEASIBLE
    assert result.certificate is None


def test_scalar_lambda_two_is_feasible():
    result = design_observer(scalar_problem(2.0))
    assert result.feasible and result.verified
    L = result.gains.gain(1, 0).item()
    assert abs(1 - L) < 1


def test_contradictory_constraints_yield_no_certificate():
    problem = scalar_problem(2.0)
    system = assemble_lmis(problem, build_script_matrices([[0.0]], 1.0, 0))
    key = P_key(1, 0)
    system.constraints.append(
        MatrixConstraint("P<0", "extra", (1, 0), 1, lambda v, bmat, key=key: v[key])
    )
    res = solve_feasibility(system)
    assert res.verdict != FEASIBLE and res.certificate is None


class _FailingBackend:
    def solve(self, system):
        return BackendResult(None, None, "failed", "iteration limit")


def test_backend_failure_is_undecided():
    problem = scalar_problem(2.0)
    system = assemble_lmis(problem, build_script_matrices([[0.0]], 1.0, 0))
    assert solve_feasibility(system, backend=_FailingBackend()).verdict == UNDECIDED


def test_iteration_limit_is_not_a_certificate(bench_plant):
    from rrobserver.solvers import CvxpyBackend

    problem = SynthesisProblem(bench_plant, 0.02, 1, 20.0)
    result = design_observer(problem, backend=CvxpyBackend(max_iters=2))
    assert result.verdict in (UNDECIDED, "infeasible")
    assert result.certificate is None


# -- gain recovery and verification ------------------------------------------------


def test_recover_base_case():
    scripts = build_script_matrices([[0.5]], 0.3, 0)
    cert = Certificate({(1, 0): np.eye(1)}, {(1, 0): np.array([[2.0]])},
                       {(1, 0): np.array([[0.7]])}, 1.0)
    gains = recover_gains(cert, scripts, SynthesisProblem(PlantModel([[0.5]], [[1.0]]), 0.3, 0, 2.0))
    np.testing.assert_allclose(gains.gain(1, 0), [[0.7 / (2.0 * scripts.Gamma.item())]])


def test_recover_rejects_singular_X():
    scripts = build_script_matrices(np.zeros((2, 2)), 1.0, 0)
    cert = Certificate({(1, 0): np.eye(2)}, {(1, 0): np.array([[1.0, 0], [0, 0]])},
                       {(1, 0): np.ones((2, 1))}, 1.0)
    problem = SynthesisProblem(PlantModel(np.zeros((2, 2)), [[1.0, 0.0]]), 1.0, 0, 2.0)
    with pytest.raises(IllConditionedCertificateError):
        recover_gains(cert, scripts, problem)


def test_bench_design_gain_identity(bench_design):
    r = bench_design
    assert gain_identity_residual(r.certificate, r.scripts, r.gains) <= GAIN_IDENTITY_RTOL


def test_small_random_design_gain_identity():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3)) * 0.5
    plant = PlantModel(A, rng.normal(size=(2, 3)))
    result = design_observer(SynthesisProblem(plant, 0.05, 2, 10.0))
    assert result.feasible and result.verified
    assert gain_identity_residual(result.certificate, result.scripts, result.gains) <= GAIN_IDENTITY_RTOL


def test_closed_loop_zero_gains(A_bench, C_bench):
    scripts = build_script_matrices(A_bench, 0.02, 3)
    gains = GainSchedule.zeros(4, C_bench, 3)
    for d in range(4):
        np.testing.assert_array_equal(closed_loop_matrix(scripts, gains, C_bench, 2, d), scripts.A_d[d])


def test_closed_loop_scalar_deadbeat():
    scripts = build_script_matrices([[0.0]], 1.0, 0)
    gains = GainSchedule({(1, 0): np.array([[1.0]])})
    assert closed_loop_matrix(scripts, gains, [[1.0]], 1, 0).item() == pytest.approx(0.0, abs=1e-15)


def test_verify_scalar_deadbeat_passes():
    scripts = build_script_matrices([[0.0]], 1.0, 0)
    gains = GainSchedule({(1, 0): np.array([[1.0]])})
    cert = Certificate({(1, 0): np.eye(1)}, {}, {}, 1.0)
    report = verify_certificate(cert, scripts, gains, scalar_problem(2.0))
    assert report.passed and report.worst_lambda_max == pytest.approx(-1.0)


def test_bench_certificate_verifies(bench_design):
    assert bench_design.feasible
    report = bench_design.report
    assert report.passed and report.worst_lambda_max < 0 and report.n_tests == 50


def test_zero_gains_fail_on_unstable_plant(bench_design, A_bench, C_bench):
    r = bench_design
    assert spectral_radius(r.scripts.A_d[0]) > 1
    zero = GainSchedule.zeros(4, C_bench, 4)
    assert not verify_certificate(r.certificate, r.scripts, zero, r.problem).passed


def test_certificate_margin_invariants(bench_design):
    r = bench_design
    system = assemble_lmis(r.problem, r.scripts)
    margin = constraint_margin(system, r.certificate.values())
    assert margin >= 1e-7
    assert margin == pytest.approx(r.certificate.feasibility_margin)
    assert min(np.linalg.eigvalsh(P)[0] for P in r.certificate.P.values()) >= margin


def test_concentrated_design_bench_plant(bench_plant):
    result = design_observer(SynthesisProblem(bench_plant, 0.02, 2, 20.0, "concentrated"))
    assert result.feasible and result.verified
    assert result.gains.gain(1, 2).shape == (4, 2)
    assert result.report.n_tests == 9


def test_lambda_grid_fallback():
    result = design_observer(scalar_problem(1.0), lambda_grid=[0.5, 2.0])
    assert result.feasible and result.problem.lam == 2.0
