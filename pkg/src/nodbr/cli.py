"""Command-line entry point.

Every subcommand resolves its configuration as defaults < config file <
flags, writes its outputs plus ``run_manifest.json`` into ``--out`` and
exits with 0 (success), 1 (validation error, message names the error class)
or 2 (I/O error).
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys

import numpy as np

from . import __version__
from .dynamics import DecisionState, NodParams, integrate, phase_readout, random_initial
from .errors import BadLength, NodbrError
from .game import GameParams, all_profiles, kernel_for, local_maximizers, nash_profiles, potential, utility_kernel
from .harness import (
    CoverageScenario,
    DEFAULT_GAME,
    DEFAULT_NOD,
    ForcingRamp,
    bifurcation_sweep,
    default_scenario,
    evidence_threshold,
    hysteresis_sweep,
    run_logit_experiment,
    run_nod_experiment,
    write_records,
)
from .reduction import recommit_threshold, reduced_coefficients
from .spectral import ActionRing, build_circulant, dominant_mode, kernel_from_config

KERNEL_DEFAULT = {"K": 18, "mexican_hat": {"excite_width": 2, "excite_gain": 1.0, "inhibit_gain": 0.6, "normalize": True}}


class OutputExists(OSError):
    pass


def _coverage_defaults() -> dict:
    sc = default_scenario().to_config()
    sc.update(
        {
            "N": DEFAULT_GAME.N,
            "game": DEFAULT_GAME.to_config(),
            "nod": DEFAULT_NOD.to_config(),
            "kernel": copy.deepcopy(KERNEL_DEFAULT),
            "seed": 0,
            "executor": "vectorized",
            "readout": "argmax",
        }
    )
    return sc


DEFAULTS = {
    "spectrum": {"kernel": KERNEL_DEFAULT},
    "simulate": {
        "kernel": KERNEL_DEFAULT,
        "nod": {"tau_z": 1.0, "d_z": 1.0, "alpha0": 1.05, "kappa": 0.0, "sigmoid": "tanh"},
        "evidence": None,
        "t_end": 200.0,
        "dt": 0.02,
        "seed": 0,
    },
    "bifurcate": {
        "kernel": KERNEL_DEFAULT,
        "nod": {"tau_z": 1.0, "d_z": 1.0, "alpha0": 1.0, "kappa": 0.0, "sigmoid": "tanh"},
        "alpha_min": 0.9,
        "alpha_max": 1.1,
        "n_alpha": 21,
        "evidence": None,
        "seed": 0,
    },
    "hysteresis": {
        "kernel": KERNEL_DEFAULT,
        "nod": {"tau_z": 1.0, "d_z": 1.0, "alpha0": None, "kappa": 0.505, "sigmoid": "tanh"},
        "mu0_fraction": 0.85,
        "ramp": None,
        "seed": 0,
    },
    "coverage": dict(_coverage_defaults(), variant="nod"),
    "compare": _coverage_defaults(),
    "nash": {"N": 3, "K": 6, "rho": 0.05, "V": None, "seed": 0},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_path(cfg: dict, path: str, value) -> None:
    keys = path.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


# flag dest -> config path
FLAG_PATHS = {
    "K": "K",
    "N": "N",
    "seed": "seed",
    "alpha0": "nod.alpha0",
    "kappa": "nod.kappa",
    "tau_z": "nod.tau_z",
    "d_z": "nod.d_z",
    "t_end": "t_end",
    "dt": "dt",
    "alpha_min": "alpha_min",
    "alpha_max": "alpha_max",
    "n_alpha": "n_alpha",
    "mu0_fraction": "mu0_fraction",
    "rho": "rho",
    "beta": "game.logit_beta",
    "horizon": "horizon",
    "inner_horizon": "inner_horizon",
    "executor": "executor",
    "readout": "readout",
    "variant": "variant",
    "matrix": "matrix",
}


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS[args.command])
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if "kernel" in cfg and "kernel" not in doc and ("mexican_hat" in doc or "profile" in doc):
            # a bare kernel file
            doc = {"kernel": doc}
        cfg = _merge(cfg, doc)
    for dest, path in FLAG_PATHS.items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        if args.command in ("coverage", "compare") and dest == "rho":
            path = "game.rho"
        if dest == "K" and "kernel" in cfg:
            _set_path(cfg, "kernel.K", val)
        _set_path(cfg, path, val)
    if args.command in ("coverage", "compare") and "kernel" in cfg:
        cfg["kernel"]["K"] = cfg["K"]
    return cfg


# ---------------------------------------------------------------- commands


def _operator(cfg):
    ring, kernel = kernel_from_config(cfg["kernel"])
    return build_circulant(kernel, ring)


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_table(out, name, records, fmt):
    if fmt == "json":
        _dump(os.path.join(out, f"{name}.json"), records)
    else:
        write_records(os.path.join(out, f"{name}.csv"), records)


def cmd_spectrum(cfg, out, fmt):
    op = _operator(cfg)
    k_star, lam, gap = dominant_mode(op)
    result = {
        "K": op.K,
        "k_star": k_star,
        "lambda_star": lam,
        "spectral_gap": gap,
        "alpha_c": 1.0 / lam,
        "eigenvalues": op.eigenvalues.tolist(),
        "profile": op.kernel.profile.tolist(),
    }
    _dump(os.path.join(out, "spectrum.json"), result)
    if cfg.get("matrix"):
        np.savetxt(os.path.join(out, "A.csv"), op.A, delimiter=",", fmt="%.17g")
    return result


def _evidence(cfg, K):
    b = cfg.get("evidence")
    if b is None:
        return np.zeros(K)
    b = np.asarray(b, dtype=float)
    if b.shape != (K,):
        raise BadLength(f"evidence has shape {b.shape}, expected ({K},)")
    return b


def cmd_simulate(cfg, out, fmt):
    op = _operator(cfg)
    params = NodParams.from_config(cfg["nod"])
    rng = np.random.default_rng(cfg["seed"])
    b = _evidence(cfg, op.K)
    traj = integrate(DecisionState(random_initial(op.K, rng)), params, op, b, dt=cfg["dt"], t_end=cfg["t_end"])
    traj.to_csv(os.path.join(out, "trajectory.csv"), op)
    r, th = phase_readout(traj.final.z, op)
    result = {
        "status": traj.status.value,
        "t_final": traj.final.t,
        "r": r,
        "theta": th,
        "action": int(np.argmax(traj.final.z)),
        "z_final": traj.final.z.tolist(),
    }
    _dump(os.path.join(out, "summary.json"), result)
    return result


def cmd_bifurcate(cfg, out, fmt):
    op = _operator(cfg)
    params = NodParams.from_config(cfg["nod"])
    alphas = np.linspace(cfg["alpha_min"], cfg["alpha_max"], int(cfg["n_alpha"]))
    records = bifurcation_sweep(params, op, alphas, _evidence(cfg, op.K), seed=cfg["seed"])
    _write_table(out, "bifurcation", records, fmt)
    return {"points": len(records)}


def cmd_hysteresis(cfg, out, fmt):
    op = _operator(cfg)
    nod = dict(cfg["nod"])
    if nod.get("alpha0") is None:
        base = reduced_coefficients(NodParams.from_config(dict(nod, alpha0=1.0)), op)
        base.require_subcritical()
        # mu0 = -d_z + alpha0 lambda; the saddle-node value does not depend on alpha0
        nod["alpha0"] = (float(nod["d_z"]) + cfg["mu0_fraction"] * base.mu_SN) / base.lambda_star
    params = NodParams.from_config(nod)
    model = reduced_coefficients(params, op)
    ramp = None
    if cfg.get("ramp"):
        ramp = ForcingRamp(float(cfg["ramp"]["q_aligned"]), float(cfg["ramp"]["q_against"]), int(cfg["ramp"].get("n_steps", 200)))
    res = hysteresis_sweep(model, params, op, ramp)
    _write_table(out, "hysteresis", res.records, fmt)
    result = {
        "alpha0": params.alpha0,
        "kappa": params.kappa,
        "mu0": model.mu0,
        "mu_SN": model.mu_SN,
        "up_jump": res.up_jump,
        "down_jump": res.down_jump,
        "loop_area": res.loop_area,
        "ramp": {"q_aligned": res.ramp.q_aligned, "q_against": res.ramp.q_against, "n_steps": res.ramp.n_steps},
    }
    if model.subcritical and model.mu_SN < model.mu0 < 0:
        result["delta_star"] = evidence_threshold(model)
        result["recommit_threshold"] = recommit_threshold(model)
    _dump(os.path.join(out, "summary.json"), result)
    return result


def _coverage_setup(cfg):
    scenario = CoverageScenario.from_config(cfg)
    game = GameParams(int(cfg["N"]), float(cfg["game"]["rho"]), float(cfg["game"]["logit_beta"]))
    params = NodParams.from_config(cfg["nod"])
    op = _operator(cfg)
    return scenario, game, params, op


def _run_variant(variant, cfg, scenario, game, params, op):
    if variant == "nod":
        return run_nod_experiment(
            scenario, params, game, op, seed=int(cfg["seed"]), executor=cfg["executor"], readout=cfg["readout"]
        )
    if variant == "logit":
        return run_logit_experiment(scenario, game, kernel_for(op), seed=int(cfg["seed"]))
    raise ValueError(f"variant must be 'nod' or 'logit', got {variant!r}")


def _write_log(log, out, fmt):
    if fmt == "json":
        _dump(
            os.path.join(out, "metrics.json"),
            {
                "br_fraction": log.br_fraction,
                "cum_switches": log.cum_switches,
                "potential": log.potential,
                "modal_action": log.modal_action,
                "actions": log.actions,
            },
        )
    else:
        log.to_csv(out)


def cmd_coverage(cfg, out, fmt):
    scenario, game, params, op = _coverage_setup(cfg)
    log = _run_variant(cfg["variant"], cfg, scenario, game, params, op)
    _write_log(log, out, fmt)
    result = log.summary()
    _dump(os.path.join(out, "summary.json"), result)
    return result


def cmd_compare(cfg, out, fmt):
    scenario, game, params, op = _coverage_setup(cfg)
    result = {}
    for variant in ("nod", "logit"):
        log = _run_variant(variant, cfg, scenario, game, params, op)
        sub = os.path.join(out, variant)
        os.makedirs(sub, exist_ok=True)
        _write_log(log, sub, fmt)
        s = log.summary()
        result[variant] = {"switches": s["switches"], "min_br_fraction": s["min_br_fraction"]}
    nod_sw = result["nod"]["switches"]
    result["switch_ratio"] = result["logit"]["switches"] / nod_sw if nod_sw else None
    _dump(os.path.join(out, "compare.json"), result)
    return result


def cmd_nash(cfg, out, fmt):
    N, K = int(cfg["N"]), int(cfg["K"])
    kernel = utility_kernel(ActionRing(K), 1)
    if cfg.get("V") is None:
        V = np.random.default_rng(cfg["seed"]).dirichlet(np.ones(K))
    else:
        V = np.asarray(cfg["V"], dtype=float)
        if V.shape != (K,):
            raise BadLength(f"V has shape {V.shape}, expected ({K},)")
    game = GameParams(N, float(cfg["rho"]))
    nash = nash_profiles(V, game, kernel)
    maxima = set(local_maximizers(V, game, kernel))
    records = [
        {
            "profile": " ".join(map(str, p)),
            "potential": potential(np.array(p), V, game, kernel),
            "local_maximizer": p in maxima,
        }
        for p in nash
    ]
    best = max(all_profiles(N, K), key=lambda q: potential(np.array(q), V, game, kernel))
    result = {
        "N": N,
        "K": K,
        "V": V.tolist(),
        "global_maximizer": " ".join(map(str, best)),
        "max_potential": potential(np.array(best), V, game, kernel),
        "n_nash": len(nash),
        "all_local_maximizers": all(r["local_maximizer"] for r in records),
        "sets_equal": set(nash) == maxima,
        "profiles": [r["profile"] for r in records],
    }
    if records:
        _write_table(out, "nash", records, fmt)
    _dump(os.path.join(out, "summary.json"), result)
    return result


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "hysteresis": cmd_hysteresis,
    "coverage": cmd_coverage,
    "compare": cmd_compare,
    "nash": cmd_nash,
}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nodbr", description="Opinion-dynamics best response on a circulant action ring.")
    p.add_argument("--version", action="version", version=f"nodbr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--out", default="nodbr_out", help="output directory (created if absent)")
        sp.add_argument("--seed", type=int, help="master random seed")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular outputs")
        sp.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")

    def nod_flags(sp):
        sp.add_argument("--K", type=int, help="number of actions (sectors)")
        sp.add_argument("--alpha0", type=float, help="base coupling gain (dimensionless)")
        sp.add_argument("--kappa", type=float, help="state-dependent gain coefficient (dimensionless)")
        sp.add_argument("--tau-z", dest="tau_z", type=float, help="opinion time constant (time units)")
        sp.add_argument("--d-z", dest="d_z", type=float, help="leak rate (1/time)")

    sp = sub.add_parser("spectrum", help="eigenstructure of the coupling kernel")
    common(sp)
    sp.add_argument("--K", type=int, help="number of actions (sectors)")
    sp.add_argument("--matrix", action="store_true", default=None, help="also write the coupling matrix to A.csv")

    sp = sub.add_parser("simulate", help="integrate one agent under constant evidence")
    common(sp)
    nod_flags(sp)
    sp.add_argument("--t-end", dest="t_end", type=float, help="final time (time units)")
    sp.add_argument("--dt", type=float, help="RK4 step (time units, at most tau_z/10)")

    sp = sub.add_parser("bifurcate", help="equilibria versus base gain")
    common(sp)
    nod_flags(sp)
    sp.add_argument("--alpha-min", dest="alpha_min", type=float, help="lowest base gain")
    sp.add_argument("--alpha-max", dest="alpha_max", type=float, help="highest base gain")
    sp.add_argument("--n-alpha", dest="n_alpha", type=int, help="number of gain values")

    sp = sub.add_parser("hysteresis", help="up/down forcing sweep of the committed amplitude")
    common(sp)
    nod_flags(sp)
    sp.add_argument(
        "--mu0-fraction", dest="mu0_fraction", type=float,
        help="when alpha0 is not given, place mu0 at this fraction of the saddle-node value",
    )

    for name, helptext in (("coverage", "repeated coverage game, one variant"), ("compare", "NOD and logit on the same scenario")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        nod_flags(sp)
        sp.add_argument("--N", type=int, help="number of agents")
        sp.add_argument("--rho", type=float, help="congestion weight (density units per agent)")
        sp.add_argument("--beta", type=float, help="logit inverse temperature (1/utility units)")
        sp.add_argument("--horizon", type=int, help="number of epochs")
        sp.add_argument("--inner-horizon", dest="inner_horizon", type=float, help="opinion relaxation time per epoch (time units)")
        sp.add_argument("--executor", choices=("vectorized", "sequential", "threads"), help="how agent states are integrated")
        sp.add_argument("--readout", choices=("argmax", "phase"), help="action readout from the opinion state")
        if name == "coverage":
            sp.add_argument("--variant", choices=("nod", "logit"), help="agent dynamics")

    sp = sub.add_parser("nash", help="projected Nash profiles of a small coverage game")
    common(sp)
    sp.add_argument("--exhaustive", action="store_true", help="enumerate all profiles (the only method)")
    sp.add_argument("--N", type=int, help="number of agents")
    sp.add_argument("--K", type=int, help="number of actions")
    sp.add_argument("--rho", type=float, help="congestion weight")
    return p


def _prepare_out(out: str, force: bool) -> bool:
    """Create ``out`` if needed; return whether it was created here."""
    if os.path.isdir(out) and os.listdir(out) and not force:
        raise OutputExists(f"output directory {out!r} is not empty; use --force to overwrite")
    created = not os.path.isdir(out)
    os.makedirs(out, exist_ok=True)
    return created


def _discard(out: str) -> None:
    """Remove a directory this run created, leaving no partial outputs."""
    for root, dirs, files in os.walk(out, topdown=False):
        for f in files:
            os.remove(os.path.join(root, f))
        for d in dirs:
            os.rmdir(os.path.join(root, d))
    os.rmdir(out)


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    created = False
    try:
        cfg = resolve_config(args)
        created = _prepare_out(args.out, args.force)
        result = COMMANDS[args.command](cfg, args.out, args.format)
        manifest = {
            "command": args.command,
            "version": __version__,
            "argv": list(sys.argv[1:] if argv is None else argv),
            "seed": cfg.get("seed"),
            "config": cfg,
        }
        _dump(os.path.join(args.out, "run_manifest.json"), manifest)
    except Exception as exc:
        if isinstance(exc, (OSError, json.JSONDecodeError)):
            code = 2
        elif isinstance(exc, (NodbrError, ValueError, KeyError, TypeError)):
            code = 1
        else:
            raise
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if created:
            _discard(args.out)
        return code
    print(json.dumps(result, indent=2, default=_json_default))
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
