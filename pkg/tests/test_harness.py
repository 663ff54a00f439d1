import csv
import json

import numpy as np
import pytest

from nodbr.dynamics import NodParams
from nodbr.errors import NotSubcritical
from nodbr.game import GameParams, kernel_for, potential
from nodbr.harness import (
    DEFAULT_GAME,
    DEFAULT_NOD,
    AmbiguityWindow,
    Bump,
    CoverageScenario,
    DirectionalShift,
    ForcingRamp,
    MetricsLog,
    ScenarioError,
    bifurcation_sweep,
    default_scenario,
    hysteresis_sweep,
    reallocation_episodes,
    recompute_br_fraction,
    run_logit_experiment,
    run_nod_experiment,
    seed_streams,
    write_records,
)
from nodbr.reduction import evidence_threshold, reduced_coefficients
from nodbr.spectral import ActionRing


def three_bumps(horizon, events=(), inner=60.0):
    return CoverageScenario(
        ring=ActionRing(18),
        horizon=horizon,
        bumps=(Bump(3.0, 2.0, 1.0), Bump(8.0, 2.0, 0.8), Bump(16.0, 2.0, 0.6)),
        events=events,
        inner_horizon=inner,
    )


@pytest.fixture(scope="module")
def short_run(op18):
    scen = three_bumps(40)
    return scen, run_nod_experiment(scen, DEFAULT_NOD, DEFAULT_GAME, op18, seed=5)


# ---------------------------------------------------------------- scenario


def test_density_normalised_and_nonnegative():
    scen = default_scenario()
    table = scen.density_table()
    assert table.shape == (700, 18)
    assert np.all(table >= 0)
    assert np.allclose(table.sum(axis=1), 1.0, atol=1e-14)


def test_events_reshape_density():
    scen = default_scenario()
    _, amps = scen.bump_state(100)
    assert list(amps) == [1.0, 0.8, 0.6]
    _, amps = scen.bump_state(285)
    assert amps[0] == amps[1] == pytest.approx(0.9)
    centers, _ = scen.bump_state(429)
    assert centers[0] == 3.0
    centers, _ = scen.bump_state(430)
    assert centers[0] == 5.0
    assert np.argmax(scen.density(100)) == 3
    assert scen.density(500)[5] > scen.density(100)[5] and scen.density(500)[3] < scen.density(100)[3]


def test_keyframed_bump():
    b = Bump([[0, 2.0], [10, 4.0]], 1.0, [[0, 1.0], [10, 0.0]])
    assert b.center_at(5) == 3.0 and b.amplitude_at(5) == 0.5
    assert b.center_at(50) == 4.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"horizon": 0},
        {"bumps": ()},
        {"events": (AmbiguityWindow(10, 900),)},
        {"events": (DirectionalShift(5, 7, 1.0),)},
        {"dt_fraction": 0.5},
    ],
)
def test_scenario_validation(kwargs):
    base = dict(ring=ActionRing(18), horizon=100, bumps=(Bump(3.0, 2.0),))
    base.update(kwargs)
    with pytest.raises(ScenarioError):
        CoverageScenario(**base)
    with pytest.raises(ScenarioError):
        Bump(1.0, 0.0)
    with pytest.raises(ScenarioError):
        Bump(1.0, 1.0, -0.5)


def test_scenario_config_round_trip():
    scen = default_scenario()
    doc = json.loads(json.dumps(scen.to_config()))
    again = CoverageScenario.from_config(doc)
    assert np.array_equal(again.density_table(), scen.density_table())
    with pytest.raises(ScenarioError):
        CoverageScenario.from_config({**doc, "events": [{"type": "storm"}]})


def test_short_inner_horizon_rejected(op18):
    with pytest.raises(ScenarioError):
        run_nod_experiment(three_bumps(3, inner=10.0), DEFAULT_NOD, DEFAULT_GAME, op18)


# ---------------------------------------------------------------- metrics


def synthetic_log(switches):
    T = len(switches)
    return MetricsLog(
        initial_actions=np.zeros(2, dtype=int),
        actions=np.zeros((T, 2), dtype=int),
        density=np.full((T, 4), 0.25),
        br_fraction=np.ones(T),
        switches=np.array(switches),
        potential=np.zeros(T),
    )


def test_reallocation_episodes():
    log = synthetic_log([0, 2, 0, 1, 0] + [0] * 12 + [3, 0, 0])
    assert reallocation_episodes(log) == [(1, 3, 3), (17, 17, 3)]
    assert reallocation_episodes(log, start=4) == [(17, 17, 3)]
    assert reallocation_episodes(log, gap=20) == [(1, 17, 6)]
    assert list(log.cum_switches[:5]) == [0, 2, 2, 3, 3]
    assert log.switches_between(1, 3) == 3


def test_seed_streams_independent_and_reproducible():
    a1, b1 = seed_streams(4)
    a2, b2 = seed_streams(4)
    x, y = a1.random(5), b1.random(5)
    assert np.array_equal(x, a2.random(5)) and np.array_equal(y, b2.random(5))
    assert not np.array_equal(x, y)


# ---------------------------------------------------------------- NOD runs


def test_short_run_metrics_consistent(short_run, op18):
    scen, log = short_run
    kernel = kernel_for(op18)
    assert np.array_equal(recompute_br_fraction(log, DEFAULT_GAME, kernel), log.br_fraction)
    assert np.all((log.br_fraction >= 0) & (log.br_fraction <= 1))
    assert np.all(np.diff(log.cum_switches) >= 0)
    for t in (0, 17, 39):
        assert log.potential[t] == potential(log.actions[t], log.density[t], DEFAULT_GAME, kernel)
    assert np.array_equal(log.density, scen.density_table())
    assert log.r.shape == (40, 10) and np.all(log.r > 0)


def test_potential_ascent_after_commitment(short_run):
    _, log = short_run
    assert np.all(np.diff(log.potential[10:]) >= -1e-9)
    assert np.all(log.br_fraction[10:] == 1.0)


def test_csv_outputs(short_run, tmp_path):
    _, log = short_run
    log.to_csv(tmp_path)
    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["epoch", "br_fraction", "cum_switches", "potential", "modal_action"]
    assert len(rows) == 40
    assert [float(r["br_fraction"]) for r in rows] == list(log.br_fraction)
    assert [float(r["potential"]) for r in rows] == list(log.potential)
    with open(tmp_path / "agents.csv") as fh:
        agents = list(csv.DictReader(fh))
    assert len(agents) == 400 and list(agents[0]) == ["epoch", "agent", "action", "r", "theta"]
    assert float(agents[13]["r"]) == log.r[1, 3]
    dens = np.genfromtxt(tmp_path / "density.csv", delimiter=",", skip_header=1)[:, 1:]
    assert np.array_equal(dens, log.density)


def test_rerun_bit_identical(short_run, op18, tmp_path):
    scen, log = short_run
    again = run_nod_experiment(scen, DEFAULT_NOD, DEFAULT_GAME, op18, seed=5)
    log.to_csv(tmp_path / "a")
    again.to_csv(tmp_path / "b")
    for name in ("metrics.csv", "density.csv", "agents.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_executors_bit_identical(op18):
    scen = three_bumps(4)
    game = GameParams(4, rho=0.001)
    logs = [run_nod_experiment(scen, DEFAULT_NOD, game, op18, seed=2, executor=ex) for ex in ("vectorized", "sequential", "threads")]
    for other in logs[1:]:
        assert np.array_equal(other.actions, logs[0].actions)
        assert np.array_equal(other.r, logs[0].r)
        assert np.array_equal(other.theta, logs[0].theta)


def test_unknown_executor_and_readout(op18):
    with pytest.raises(ValueError):
        run_nod_experiment(three_bumps(1), DEFAULT_NOD, GameParams(1), op18, executor="gpu")
    with pytest.raises(ValueError):
        run_nod_experiment(three_bumps(1), DEFAULT_NOD, GameParams(1), op18, readout="vote")


def test_static_single_bump_single_agent(op18):
    scen = CoverageScenario(ActionRing(18), 30, (Bump(7.0, 2.0),))
    log = run_nod_experiment(scen, DEFAULT_NOD, GameParams(1), op18, seed=1)
    assert np.all(log.actions[:, 0] == 7)
    assert log.total_switches == 0


def test_ambiguity_window_only(op18):
    scen = three_bumps(60, events=(AmbiguityWindow(20, 45, (0, 1)),))
    log = run_nod_experiment(scen, DEFAULT_NOD, DEFAULT_GAME, op18, seed=0)
    assert log.switches_between(20, 45) == 0
    assert np.all(log.br_fraction[10:] == 1.0)


def test_phase_readout_agrees(op18):
    scen = three_bumps(15)
    a = run_nod_experiment(scen, DEFAULT_NOD, DEFAULT_GAME, op18, seed=3, readout="argmax")
    b = run_nod_experiment(scen, DEFAULT_NOD, DEFAULT_GAME, op18, seed=3, readout="phase")
    assert np.array_equal(a.actions[1:], b.actions[1:])


# ---------------------------------------------------------------- logit runs


def test_logit_run_properties(op18):
    scen = three_bumps(200)
    log = run_logit_experiment(scen, DEFAULT_GAME, kernel_for(op18), seed=0)
    assert np.array_equal(recompute_br_fraction(log, DEFAULT_GAME, kernel_for(op18)), log.br_fraction)
    assert np.var(log.br_fraction) > 0
    assert log.total_switches > 500
    again = run_logit_experiment(scen, DEFAULT_GAME, kernel_for(op18), seed=0)
    assert np.array_equal(again.actions, log.actions)


def test_logit_cold_limit(op18):
    scen = CoverageScenario(ActionRing(18), 200, (Bump(7.0, 2.0),))
    log = run_logit_experiment(scen, GameParams(1, logit_beta=1e6), kernel_for(op18), seed=0)
    assert log.total_switches == 0
    assert np.all(log.actions[:, 0] == 7)


# ---------------------------------------------------------------- sweeps


def test_bifurcation_sweep(op18, tmp_path):
    recs = bifurcation_sweep(NodParams(), op18, [0.95, 1.02, 1.05, 1.1], t_end=3000)
    seeded = {r["alpha"]: r for r in recs if r["source"] == "seeded"}
    assert seeded[0.95]["r"] < 1e-10 and seeded[0.95]["stable"]
    for alpha in (1.02, 1.05):
        assert seeded[alpha]["r"] == pytest.approx(np.sqrt(2 * (alpha - 1)), rel=0.05)
        assert seeded[alpha]["stable"]
    # the fifth-order term already matters at mu = 0.1
    assert seeded[1.1]["r"] == pytest.approx(np.sqrt(0.2), rel=0.10)
    for rec in recs:
        assert rec["r_reduced"] == pytest.approx(np.sqrt(2 * max(rec["alpha"] - 1, 0)), abs=1e-9)
    write_records(tmp_path / "bif.csv", recs)
    with open(tmp_path / "bif.csv") as fh:
        assert len(list(csv.DictReader(fh))) == len(recs)


def test_bifurcation_unfolds_with_evidence(op18):
    b = 0.01 * op18.modes[1].cosine_vec
    recs = bifurcation_sweep(NodParams(), op18, [0.9, 1.0], b=b, t_end=3000)
    assert all(r["r"] > 1e-4 for r in recs)


@pytest.fixture(scope="module")
def subcritical_case(op18):
    kappa = 0.505
    m0 = reduced_coefficients(NodParams(kappa=kappa), op18)
    p = NodParams(alpha0=1 + 0.85 * m0.mu_SN, kappa=kappa)
    return p, reduced_coefficients(p, op18)


def test_hysteresis_subcritical(op18, subcritical_case):
    p, m = subcritical_case
    res = hysteresis_sweep(m, p, op18)
    assert res.up_jump is not None and res.down_jump is not None
    assert res.up_jump > 0 > res.down_jump
    assert res.loop_area > 0
    assert res.up_jump == pytest.approx(evidence_threshold(m), rel=0.10)
    legs = {r["leg"] for r in res.records}
    assert legs == {"up", "down"} and len(res.records) == 2 * (res.ramp.n_steps + 1)
    assert all(r["stable"] for r in res.records)


def test_hysteresis_supercritical_control(op18, subcritical_case):
    p, m = subcritical_case
    sup = NodParams(alpha0=1.05)
    msup = reduced_coefficients(sup, op18)
    from nodbr.harness import default_ramp

    res = hysteresis_sweep(msup, sup, op18, ramp=default_ramp(m))
    assert res.up_jump is None and res.down_jump is None
    assert abs(res.loop_area) < 1e-4
    with pytest.raises(NotSubcritical):
        hysteresis_sweep(msup, sup, op18)


def test_forcing_ramp_legs():
    up, down = ForcingRamp(1.0, 2.0, n_steps=4).legs()
    assert list(up) == [-1.0, -0.25, 0.5, 1.25, 2.0]
    assert list(down) == list(up[::-1])
