import math

import numpy as np
import pytest

from superiorization import (BlockLinearProblem, GammaSchedule, SteeringError,
                             SuperiorizationConfig, TotalVariation, algorithm_r, interleaved_run,
                             interleaved_variant_step, plain_run, read_trace, superiorized_run,
                             superiorized_step, verify_trace, write_trace, zero_provider)
from superiorization.superiorize import with_zero_provider


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def tiny_tomo(rng, side=4, rows=12, blocks=(4, 4, 4)):
    """Random nonnegative system with a nonnegative solution, like a small scan."""
    A = rng.uniform(0, 1, size=(rows, side * side)) * (rng.random((rows, side * side)) < 0.5)
    A[:, 0] += 0.1
    x_true = rng.uniform(0, 1, side * side)
    b = A @ x_true + rng.normal(scale=0.01, size=rows)
    return BlockLinearProblem.from_dense(A, b, list(blocks)), TotalVariation(side)


# -- schedule ----------------------------------------------------------------

def test_schedule_draws():
    s = GammaSchedule(0.5)
    assert [s.draw() for _ in range(4)] == [1.0, 0.5, 0.25, 0.125]
    assert s.cursor == 3
    assert s.total == 2.0
    with pytest.raises(ValueError):
        GammaSchedule(1.0)


def test_config_validation():
    tv = TotalVariation(3)
    with pytest.raises(ValueError):
        SuperiorizationConfig(tv, n_steering=0)
    with pytest.raises(ValueError):
        SuperiorizationConfig(lambda x: 0.0)
    assert SuperiorizationConfig(tv).nonascending == tv.nonascending


# -- steering step -----------------------------------------------------------

def test_zero_provider_matches_plain(rng):
    problem, tv = tiny_tomo(rng)
    R = algorithm_r(problem, True)
    cfg = SuperiorizationConfig(tv, 20, nonascending=zero_provider)
    sup = superiorized_run(R, problem.proximity(), cfg, 0.0, max_iterations=50, keep_iterates=True)
    plain = plain_run(R, problem.proximity(), 0.0, max_iterations=50, keep_iterates=True)
    assert len(sup.iterates) == len(plain.iterates) == 51
    for a, b in zip(sup.iterates, plain.iterates):
        assert np.array_equal(a, b)


def test_record_invariants(rng):
    problem, tv = tiny_tomo(rng)
    R = algorithm_r(problem, True)
    cfg = SuperiorizationConfig(tv, 5, 0.9)
    run = superiorized_run(R, problem.proximity(), cfg, 0.0, max_iterations=40, keep_iterates=True)
    prev = -1
    total_beta = 0.0
    schedule = GammaSchedule(0.9)
    for rec, x_k in zip(run.records, run.iterates):
        assert len(rec.betas) == 5
        assert all(phi <= rec.phi_ref for phi in rec.phis)
        assert rec.phi_ref == tv(x_k)
        assert all(c > p for p, c in zip([prev] + rec.cursors, rec.cursors))
        assert all(b == schedule.value(c) for b, c in zip(rec.betas, rec.cursors))
        assert rec.beta == max(rec.betas) == rec.betas[0]
        assert rec.v_norm <= 5 + 1e-12
        assert rec.reconstruction_error <= 1e-12
        assert all(n <= 1 + 1e-12 for n in rec.steering_norms)
        prev = rec.cursor
        total_beta += sum(rec.betas)
    assert total_beta <= schedule.total
    assert verify_trace(run.trace, 5, 0.9) == []


def test_large_epsilon_returns_initial_point(rng):
    problem, tv = tiny_tomo(rng)
    cfg = SuperiorizationConfig(tv, initial=np.full(16, 0.5))
    run = superiorized_run(algorithm_r(problem), problem.proximity(), cfg, 1e300)
    assert run.output.iterations_used == 0
    np.testing.assert_array_equal(run.output.point, np.full(16, 0.5))
    assert run.records == []


def test_quadratic_single_step(rng):
    from superiorization import Algorithm, Domain
    J = 6
    M = rng.normal(size=(J, J))
    H = M @ M.T + np.eye(J)
    phi = lambda x: 0.5 * x @ H @ x  # noqa: E731

    def provider(x):
        g = H @ x
        n = np.linalg.norm(g)
        return -g / n if n > 0 else np.zeros_like(g)

    cfg = SuperiorizationConfig(phi, 1, 0.99995, nonascending=provider)
    ident = Algorithm(lambda x: x, Domain.all_space(J))
    x = rng.normal(size=J)
    x_next, rec, sched = superiorized_step(ident, cfg, x, cfg.schedule())
    assert phi(x_next) <= phi(x)
    assert rec.draws >= 1 and sched.cursor == rec.draws - 1


def test_overlong_vector_is_rejected(rng):
    problem, tv = tiny_tomo(rng)
    cfg = SuperiorizationConfig(tv, 2, nonascending=lambda x: np.full(x.size, 1.0))
    with pytest.raises(SteeringError) as info:
        superiorized_run(algorithm_r(problem), problem.proximity(), cfg, 0.0, max_iterations=3)
    assert info.value.k == 0 and info.value.n == 0


def test_draw_cap_reports_position(rng):
    problem, tv = tiny_tomo(rng)

    def ascending(x):
        # a direction that increases TV for every step size
        _, d = x, -tv.nonascending(x)
        return d if d.any() else np.eye(x.size)[0]

    cfg = SuperiorizationConfig(tv, 3, 0.5, initial=np.arange(16.0) / 16, nonascending=ascending,
                                draw_cap=20)
    with pytest.raises(SteeringError, match="draws"):
        superiorized_run(algorithm_r(problem), problem.proximity(), cfg, 0.0, max_iterations=5)


def test_non_finite_criterion_rejected(rng):
    problem, _ = tiny_tomo(rng)
    cfg = SuperiorizationConfig(lambda x: math.inf, nonascending=zero_provider)
    with pytest.raises(ValueError, match="finite"):
        superiorized_run(algorithm_r(problem), problem.proximity(), cfg, 0.0)


# -- interleaved variant -----------------------------------------------------

def test_interleaved_zero_provider_is_r(rng):
    problem, tv = tiny_tomo(rng)
    cfg = SuperiorizationConfig(tv, 1, nonascending=zero_provider)
    R = algorithm_r(problem, True)
    x = rng.uniform(0, 1, 16)
    for _ in range(10):
        y, _, _ = interleaved_variant_step(problem, cfg, x, cfg.schedule())
        assert np.array_equal(y, R(x))
        x = y


def test_interleaved_single_block_is_n1(rng):
    problem, tv = tiny_tomo(rng, blocks=(12,))
    cfg = SuperiorizationConfig(tv, 1, 0.99)
    a = interleaved_run(problem, cfg, 0.0, max_iterations=25, keep_iterates=True)
    b = superiorized_run(algorithm_r(problem, True), problem.proximity(), cfg, 0.0,
                         max_iterations=25, keep_iterates=True)
    for x, y in zip(a.iterates, b.iterates):
        assert np.array_equal(x, y)
    assert [r.cursor for r in a.records] == [r.cursor for r in b.records]


def test_interleaved_draws_once_per_block(rng):
    problem, tv = tiny_tomo(rng)
    cfg = SuperiorizationConfig(tv, 1, 0.9)
    run = interleaved_run(problem, cfg, 0.0, max_iterations=5)
    assert all(len(r.betas) == problem.n_blocks for r in run.records)
    assert verify_trace(run.trace, problem.n_blocks, 0.9) == []


# -- resilience --------------------------------------------------------------

def test_epsilon_prime_compatibility(rng):
    problem, tv = tiny_tomo(rng)
    R = algorithm_r(problem, True)
    plain = plain_run(R, problem.proximity(), 0.0, max_iterations=300)
    eps = plain.trace[-1].res
    for factor in (1.5, 1.1, 1.01):
        cfg = SuperiorizationConfig(tv, 20, 0.99)
        out = superiorized_run(R, problem.proximity(), cfg, eps * factor, max_iterations=20_000)
        assert out.output.defined
        assert out.output.proximity_at_output <= eps * factor


def test_superiorized_lowers_tv(rng):
    problem, tv = tiny_tomo(rng, side=6, rows=20, blocks=(5, 5, 5, 5))
    R = algorithm_r(problem, True)
    plain = plain_run(R, problem.proximity(), 0.0, criterion=tv, max_iterations=200)
    eps = plain.trace[-1].res
    sup = superiorized_run(R, problem.proximity(), SuperiorizationConfig(tv, 20, 0.999), eps,
                           max_iterations=50_000)
    assert sup.output.defined
    assert tv(sup.output.point) < plain.trace[-1].phi


# -- traces ------------------------------------------------------------------

def test_trace_round_trip(tmp_path, rng):
    problem, tv = tiny_tomo(rng)
    run = superiorized_run(algorithm_r(problem), problem.proximity(), SuperiorizationConfig(tv, 3),
                           0.0, max_iterations=8)
    path = tmp_path / "t.csv"
    write_trace(run.trace, path, {"seed": 4, "N": 3})
    rows, meta = read_trace(path)
    assert meta == {"seed": "4", "N": "3"}
    assert rows == run.trace
    assert path.read_text().splitlines()[2] == "k,res,phi,beta,v_norm,cursor"


def test_verify_trace_catches_violations(rng):
    problem, tv = tiny_tomo(rng)
    run = superiorized_run(algorithm_r(problem), problem.proximity(), SuperiorizationConfig(tv, 3),
                           0.0, max_iterations=6)
    trace = run.trace
    assert verify_trace(trace, 3, 0.99995) == []
    trace[2].v_norm = 3.5
    trace[3].beta *= 0.7
    trace[1].beta = 0.99995 ** (trace[1].cursor + 5)
    trace[4].cursor = trace[3].cursor + 1
    problems = verify_trace(trace, 3, 0.99995)
    assert any("N = 3" in p for p in problems)
    assert any("not a schedule value" in p for p in problems)
    assert any("outside the draws" in p for p in problems)
    assert any("advanced" in p for p in problems)
    # epsilon check: an earlier compatible row is a violation
    assert verify_trace(run.trace[:2], 3, 0.99995, epsilon=1e300)


def test_with_zero_provider_keeps_fields():
    cfg = SuperiorizationConfig(TotalVariation(3), 7, 0.9, initial=np.ones(9))
    z = with_zero_provider(cfg)
    assert z.n_steering == 7 and z.gamma_base == 0.9 and z.nonascending is zero_provider
