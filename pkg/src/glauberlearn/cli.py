"""Command-line experiment harness.

Subcommands: generate, sample, learn, evaluate, sweep, diagnose.  Options can
come from an INI file (``--config``): a ``[common]`` section applies to every
subcommand, and a section named after the subcommand to that one only.  Keys
are the long option names (dashes or underscores).  Flags given on the command
line win over the file.

Exit codes: 0 success, 2 configuration error, 3 guard violation (problem too
large for exact enumeration), 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fileformats as ff
from .diagnostics import (
    good_event_probe,
    likelihood_ratio_probe,
    metatheorem_condition2_probe,
    sk_condition_check,
    stationarity_residuals,
    tap_residual,
)
from .dynamics import BlockSchedule, all_node_samples, adversarial_run, chain_mean, m_regime_samples, run
from .generators import ConvergenceError, FieldSpec, curie_weiss, random_bounded_degree, rs_fixed_point, sk_model
from .ising import MAX_BLOCK_SIZE, MAX_ENUMERATION_SITES, GuardError, IsingModel, exact_distribution, exact_sample
from .learner import REPORT_COLUMNS, evaluate, learn_honest
from .regression import SolverOptions
from .seeding import derive_rng, seed_sequence

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_NONCONVERGED = 0, 2, 3, 4
JOBS_ENV = "GLAUBERLEARN_JOBS"
FAMILIES = ("curie-weiss", "sk", "regular", "zero")
DYNAMICS = ("glauber", "round-robin", "ell-block", "symmetric", "iid", "m-regime", "adversarial")
PROBES = ("ratios", "stationarity", "good-event", "tap", "sk-check", "condition2")
SWEEP_KEY = ("family", "beta", "dynamics", "T", "seed")
SWEEP_COLUMNS = ("family", "beta") + REPORT_COLUMNS
DIAG_COLUMNS = ("probe", "item", "value", "reference", "passed")


class ConfigError(Exception):
    pass


class NonConvergence(Exception):
    pass


def _floats(text) -> list[float]:
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text) -> list[int]:
    out = []
    for v in str(text).replace(",", " ").split():
        f = float(v)
        if f != int(f):
            raise ValueError(f"{v!r} is not an integer")
        out.append(int(f))
    return out


def _words(text) -> list[str]:
    return str(text).replace(",", " ").split()


def _int(text) -> int:
    return _ints(text)[0] if str(text).strip() else 0


# Option table per subcommand: (name, converter, default, help).  ``None`` as
# default means "not set".
_COMMON = [
    ("seed", _int, 0, "master seed"),
    ("jobs", _int, None, f"parallel workers (default ${JOBS_ENV} or 1)"),
]
_MODEL = [
    ("family", str, None, f"model family: {', '.join(FAMILIES)}"),
    ("n", _int, None, "number of sites"),
    ("beta", float, None, "inverse temperature (sk, curie-weiss) or edge strength (regular)"),
    ("d", _int, 3, "degree for the regular family"),
    ("strength", float, None, "edge strength for the regular family (default: beta)"),
    ("field", str, "zero", "field law: zero, constant or gaussian"),
    ("field-mu", float, 0.0, "field mean"),
    ("field-sigma2", float, 0.0, "field variance"),
]
_DYN = [
    ("dynamics", str, "glauber", f"one of {', '.join(DYNAMICS)}"),
    ("ell", _int, 2, "block size for ell-block"),
    ("p", float, 0.5, "inclusion probability for symmetric blocks"),
    ("corrupt", _ints, [], "corrupt sites (1-based) for adversarial dynamics"),
    ("gamma", float, 0.25, "smoothness floor for corrupt updates"),
    ("policy", str, "stubborn", "adversary policy: stubborn, stubborn-, contrarian, uniform"),
]
_SOLVER = [
    ("radius", str, "auto", "l1 radius, or 'auto'"),
    ("tol", float, 1e-10, "loss-improvement stopping tolerance"),
    ("max-iters", _int, 20000, "iteration cap per node"),
    ("step-rule", str, "spectral", "spectral or uniform"),
    ("alpha", float, None, "support threshold (default: min true |A_ij|)"),
]
OPTIONS = {
    "generate": _COMMON + _MODEL + [("out", str, "-", "output model file ('-' for stdout)")],
    "sample": _COMMON + [
        ("model", str, None, "model file"),
        ("steps", _int, None, "number of steps (or samples)"),
        ("per-node", _int, None, "m-regime: exact number of samples per node"),
        ("out", str, None, "trajectory file, or directory for m-regime"),
    ] + _DYN,
    "learn": _COMMON + [
        ("input", str, None, "trajectory file or node-sample directory"),
        ("truth", str, None, "true model file for the report"),
        ("corrupt", _ints, None, "corrupt sites (1-based); read from the trajectory if omitted"),
        ("out", str, None, "estimate file"),
        ("report", str, None, "report CSV"),
    ] + _SOLVER,
    "evaluate": _COMMON + [
        ("truth", str, None, "true model file"),
        ("estimate", str, None, "estimate file"),
        ("alpha", float, None, "support threshold"),
        ("report", str, None, "report CSV"),
    ],
    "sweep": _COMMON + [o for o in _MODEL if o[0] != "beta"] + [
        ("betas", _floats, None, "grid of beta values"),
        ("T", _ints, None, "grid of step budgets"),
        ("dynamics", _words, ["glauber"], "grid of dynamics"),
        ("seeds", _ints, None, "seeds, one cell per seed"),
        ("out", str, None, "output CSV (resumed if present)"),
        ("limit", _int, None, "stop after this many new cells"),
    ] + [o for o in _DYN if o[0] != "dynamics"] + _SOLVER,
    "diagnose": _COMMON + _MODEL + [
        ("model", str, None, "model file (instead of a family)"),
        ("probes", _words, ["ratios"], f"probes to run: {', '.join(PROBES)}, all"),
        ("node", _int, None, "node for per-node probes (1-based, default last)"),
        ("intervals", _int, 10000, "inter-update intervals for the good-event probe"),
        ("samples", _int, 10000, "samples for the sk-check probe"),
        ("delta", float, 0.1, "confidence level for the TAP reference"),
        ("out", str, None, "diagnostics CSV"),
    ] + _DYN,
}


# -- option plumbing -------------------------------------------------------------------------

def _dest(name):
    return name.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glauberlearn", description="Learn Ising models from dynamics.")
    parser.add_argument("--config", help="INI configuration file")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd, help=(globals()[f"cmd_{cmd}"].__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", dest="sub_config", help="INI configuration file")
        for name, conv, default, help_ in opts:
            many = {"nargs": "+"} if conv in (_floats, _ints, _words) else {}
            p.add_argument(f"--{name}", dest=_dest(name), default=None, **many,
                           help=help_ + ("" if default in (None, []) else f" (default {default})"))
    return parser


def _read_config(path):
    if path is None:
        return {}
    if not Path(path).is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep 'T' distinct from 't'
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return {s: {_dest(k): v for k, v in cp.items(s)} for s in cp.sections()}


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    """Merge built-in defaults, config file values and command-line flags."""
    sections = _read_config(getattr(args, "sub_config", None) or args.config)
    from_file = {**sections.get("common", {}), **sections.get(command, {})}
    known = {_dest(o[0]) for o in OPTIONS[command]}
    unknown = set(sections.get(command, {})) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{command}]: {', '.join(sorted(unknown))}")
    out = {}
    for name, conv, default, _ in OPTIONS[command]:
        key = _dest(name)
        raw = getattr(args, key, None)
        if isinstance(raw, list):
            raw = " ".join(raw)
        if raw is None:
            raw = from_file.get(key)
        if raw is None:
            out[key] = default
            continue
        try:
            out[key] = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for --{name}: {raw!r} ({exc})") from None
    if "jobs" in out and out["jobs"] is None:
        env = os.environ.get(JOBS_ENV, "1")
        try:
            out["jobs"] = int(env)
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    if out.get("jobs") is not None and out["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")
    return out


def _require(opts, *names):
    missing = [n for n in names if opts.get(_dest(n)) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join(f"--{m}" for m in missing))


def _existing(path, what):
    if not Path(path).exists():
        raise ConfigError(f"{what} {path} not found")
    return path


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- shared builders -------------------------------------------------------------------------

def field_spec(opts) -> FieldSpec:
    kind = opts["field"]
    if kind == "zero":
        return FieldSpec.zero()
    if kind == "constant":
        return FieldSpec.constant(opts["field_mu"])
    if kind == "gaussian":
        return FieldSpec.gaussian(opts["field_mu"], opts["field_sigma2"])
    raise ConfigError(f"unknown field law {kind!r}")


def build_model(family: str, n: int, beta: float | None, seed: int, d: int = 3, strength: float | None = None,
                field: FieldSpec | None = None) -> IsingModel:
    """Model of a named family; random families draw from ``derive_rng(seed, "model", family, n)``."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if n is None or n < 1:
        raise ConfigError("n must be a positive integer")
    rng = derive_rng(seed, "model", family, n)
    if family == "zero":
        return IsingModel.zeros(n)
    if family == "regular":
        s = strength if strength is not None else beta
        if s is None:
            raise ConfigError("regular family needs --strength or --beta")
        return random_bounded_degree(n, d, s, rng)
    if beta is None:
        raise ConfigError(f"{family} family needs --beta")
    if family == "curie-weiss":
        return curie_weiss(n, beta)
    return sk_model(n, beta, field, rng)


def schedule_for(opts, n: int) -> BlockSchedule:
    kind = opts["dynamics"]
    if kind not in DYNAMICS:
        raise ConfigError(f"unknown dynamics {kind!r}; choose from {', '.join(DYNAMICS)}")
    if kind == "glauber":
        return BlockSchedule.glauber()
    if kind == "round-robin":
        return BlockSchedule.round_robin()
    if kind == "ell-block":
        return BlockSchedule.ell_block(opts["ell"])
    if kind == "symmetric":
        return BlockSchedule.symmetric(p=opts["p"])
    if kind == "iid":
        return BlockSchedule.full_resample()
    if kind == "m-regime":
        return BlockSchedule.m_regime()
    corrupt = [i - 1 for i in opts["corrupt"] or []]
    return BlockSchedule.adversarial(corrupt, opts["gamma"], opts["policy"])


def simulate(model: IsingModel, schedule: BlockSchedule, T: int, seed: int, per_node: int | None = None):
    """Trajectory (or, for the M-regime, per-node sample sets) from labelled seed streams."""
    if T is not None and T < 1:
        raise ConfigError("the step budget must be positive")
    schedule.validate(model.n)
    kind = schedule.kind
    if kind == "full_resample" and model.n > MAX_ENUMERATION_SITES:
        raise GuardError(f"iid sampling enumerates all 2^n states; n={model.n} exceeds the guard "
                         f"n <= {MAX_ENUMERATION_SITES}. Use --dynamics glauber for larger models.")
    stream = seed_sequence(seed, "chain", schedule.descriptor())
    if kind == "m_regime":
        return m_regime_samples(model, T or 1, stream, per_node)
    x0 = (2 * derive_rng(seed, "x0").integers(0, 2, size=model.n) - 1).astype(np.int8)
    if kind == "adversarial":
        traj = adversarial_run(model, schedule.corrupt, schedule.gamma, schedule.policy, x0, T, stream)
    else:
        traj = run(model, schedule, x0, T, stream)
    return replace(traj, seed=seed)


def solver_options(opts) -> SolverOptions:
    try:
        return SolverOptions(tol=opts["tol"], max_iters=opts["max_iters"], step_rule=opts["step_rule"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_radius(text):
    if text in (None, "auto"):
        return None
    try:
        r = float(text)
    except ValueError:
        raise ConfigError(f"radius must be a number or 'auto', got {text!r}") from None
    if not r > 0:
        raise ConfigError("radius must be positive")
    return r


# -- subcommands -----------------------------------------------------------------------------

def cmd_generate(opts) -> int:
    """Write a model file for a named family."""
    _require(opts, "family", "n")
    model = build_model(opts["family"], opts["n"], opts["beta"], opts["seed"], opts["d"], opts["strength"],
                        field_spec(opts))
    if opts["family"] == "regular":
        s = opts["strength"] if opts["strength"] is not None else opts["beta"]
        params = f"d={opts['d']} strength={s}"
    else:
        params = f"beta={opts['beta']}"
    note = f"family={opts['family']} n={opts['n']} {params} seed={opts['seed']}"
    _emit(ff.format_model(model, comments=[note]), opts["out"])
    return EXIT_OK


def cmd_sample(opts) -> int:
    """Run dynamics on a model and write a trajectory (or node-sample files)."""
    _require(opts, "model", "out")
    model = ff.read_model(_existing(opts["model"], "model file"))
    schedule = schedule_for(opts, model.n)
    if schedule.kind == "m_regime":
        if opts["steps"] is None and opts["per_node"] is None:
            raise ConfigError("m-regime needs --steps or --per-node")
        sets = simulate(model, schedule, opts["steps"], opts["seed"], opts["per_node"])
        ff.write_node_samples(opts["out"], sets)
    else:
        _require(opts, "steps")
        ff.write_trajectory(opts["out"], simulate(model, schedule, opts["steps"], opts["seed"]))
    return EXIT_OK


def _load_sample_sets(path):
    p = Path(_existing(path, "input"))
    if p.is_dir():
        sets = ff.read_node_samples(p)
        return sets, "m_regime", sum(len(s) for s in sets), None, ()
    traj = ff.read_trajectory(p)
    sched = BlockSchedule.from_descriptor(traj.schedule)
    return all_node_samples(traj), sched.kind, len(traj), traj.seed, sched.corrupt


def _report_row(truth, est, alpha, n, dynamics, T, radius, seed):
    row = {"n": n, "dynamics": dynamics, "T": T, "radius": "auto" if radius is None else radius, "seed": seed}
    if truth is not None:
        row.update(evaluate(truth, est, alpha).csv_row(n, dynamics, T, row["radius"], seed))
    return row


def _print_row(row):
    print(" ".join(f"{k}={ff._cell(row[k])}" for k in REPORT_COLUMNS if row.get(k) not in (None, "")))


def cmd_learn(opts) -> int:
    """Estimate a model from a trajectory or node-sample directory."""
    _require(opts, "input")
    truth = ff.read_model(_existing(opts["truth"], "truth file")) if opts["truth"] else None
    sets, dynamics, T, seed, corrupt = _load_sample_sets(opts["input"])
    if opts["corrupt"] is not None:
        corrupt = tuple(i - 1 for i in opts["corrupt"])
    seed = opts["seed"] if seed is None else seed
    radius = parse_radius(opts["radius"])
    prov = {"dynamics": dynamics, "T": T, "seed": seed, "radius": "auto" if radius is None else radius}
    try:
        est = learn_honest(sets, corrupt, radius, solver_options(opts), opts["jobs"], prov)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if truth is not None and truth.n != est.n:
        raise ConfigError(f"truth has n={truth.n} but the data has n={est.n}")
    if opts["out"]:
        ff.write_estimate(opts["out"], est)
    row = _report_row(truth, est, opts["alpha"], est.n, dynamics, T, radius, seed)
    if opts["report"]:
        ff.write_csv(opts["report"], REPORT_COLUMNS, [row])
    _print_row(row)
    stalled = [i + 1 for i, s in enumerate(est.per_node) if s is not None and not s.converged]
    if stalled:
        raise NonConvergence(f"solver hit the iteration cap at node(s) {stalled}")
    return EXIT_OK


def _read_provenance(path) -> dict:
    prov = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") and "=" in line:
            k, _, v = line[1:].strip().partition("=")
            prov[k.strip()] = v.strip()
    return prov


def cmd_evaluate(opts) -> int:
    """Compare an estimate file with the true model."""
    _require(opts, "truth", "estimate")
    truth = ff.read_model(_existing(opts["truth"], "truth file"))
    est_path = _existing(opts["estimate"], "estimate file")
    est = ff.read_model(est_path)
    if est.n != truth.n:
        raise ConfigError(f"truth has n={truth.n} but the estimate has n={est.n}")
    prov = _read_provenance(est_path)
    report = evaluate(truth, est, opts["alpha"])
    row = report.csv_row(truth.n, prov.get("dynamics", ""), prov.get("T", ""), prov.get("radius", ""),
                         prov.get("seed", ""))
    if opts["report"]:
        ff.write_csv(opts["report"], REPORT_COLUMNS, [row])
    _print_row(row)
    print(f"tv_bound={ff._fmt(report.tv_bound)}")
    return EXIT_OK


# -- sweep -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; validated when loaded."""

    family: str
    n: int
    betas: tuple[float, ...]
    T: tuple[int, ...]
    dynamics: tuple[str, ...]
    seeds: tuple[int, ...]
    out: str
    model_params: dict = field(default_factory=dict)
    dynamics_params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    @classmethod
    def from_options(cls, opts) -> "ExperimentConfig":
        _require(opts, "family", "n", "betas", "T", "seeds", "out")
        if not opts["seeds"]:
            raise ConfigError("seeds must be nonempty")
        if not opts["T"] or min(opts["T"]) < 1:
            raise ConfigError("every budget T must be positive")
        bad = [d for d in opts["dynamics"] if d not in DYNAMICS]
        if bad:
            raise ConfigError(f"unknown dynamics {bad}")
        if opts["family"] not in FAMILIES:
            raise ConfigError(f"unknown family {opts['family']!r}")
        out_dir = Path(opts["out"]).parent
        if not out_dir.is_dir():
            raise ConfigError(f"output directory {out_dir} does not exist")
        parse_radius(opts["radius"])
        return cls(opts["family"], opts["n"], tuple(opts["betas"]), tuple(opts["T"]), tuple(opts["dynamics"]),
                   tuple(opts["seeds"]), opts["out"],
                   {k: opts[k] for k in ("d", "strength", "field", "field_mu", "field_sigma2")},
                   {k: opts[k] for k in ("ell", "p", "corrupt", "gamma", "policy")},
                   {k: opts[k] for k in ("radius", "tol", "max_iters", "step_rule", "alpha")})

    def cells(self) -> list[dict]:
        return [{"family": self.family, "n": self.n, "beta": b, "dynamics": dyn, "T": T, "seed": s,
                 **self.model_params, **self.dynamics_params, **self.solver}
                for b in self.betas for dyn in self.dynamics for T in self.T for s in self.seeds]


def _key_of(row) -> tuple:
    return (str(row["family"]), float(row["beta"]), str(row["dynamics"]), int(float(row["T"])), int(row["seed"]))


def run_cell(cell: dict) -> tuple[dict, bool]:
    """One sweep cell: model, data, estimate, report.  Returns ``(row, converged)``."""
    model = build_model(cell["family"], cell["n"], cell["beta"], cell["seed"], cell["d"], cell["strength"],
                        field_spec(cell))
    schedule = schedule_for(cell, model.n)
    data = simulate(model, schedule, cell["T"], cell["seed"])
    if isinstance(data, list):
        sets, corrupt = data, ()
    else:
        sets, corrupt = all_node_samples(data), schedule.corrupt
    radius = parse_radius(cell["radius"])
    est = learn_honest(sets, corrupt, radius, solver_options(cell))
    row = _report_row(model, est, cell["alpha"], model.n, cell["dynamics"], cell["T"], radius, cell["seed"])
    row.update(family=cell["family"], beta=cell["beta"])
    return row, all(s.converged for s in est.per_node if s is not None)


def _existing_rows(path) -> dict:
    rows = {}
    if not Path(path).is_file():
        return rows
    header, data = ff.read_csv(path)
    if tuple(header) != SWEEP_COLUMNS:
        raise ConfigError(f"{path} has a different header; refusing to resume into it")
    for r in data:
        if any(r.get(c) is None for c in SWEEP_COLUMNS):
            continue  # truncated line from an interrupted write
        rows[_key_of(r)] = r
    return rows


def _append_row(path, row):
    new = not Path(path).is_file()
    with open(path, "a", newline="") as fh:
        if new:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
        fh.write(",".join(str(ff._cell(row.get(c))) for c in SWEEP_COLUMNS) + "\n")


def cmd_sweep(opts) -> int:
    """Run a grid of (beta, dynamics, T, seed) cells into one long-form CSV."""
    cfg = ExperimentConfig.from_options(opts)
    done = _existing_rows(cfg.out)
    todo = [c for c in cfg.cells() if _key_of(c) not in done]
    if opts["limit"] is not None:
        todo = todo[: opts["limit"]]
    # rewrite what survived so the append log starts clean
    ff.write_csv(cfg.out, SWEEP_COLUMNS, [done[k] for k in sorted(done)])
    stalled = 0
    if opts["jobs"] > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=opts["jobs"]) as pool:
            results = pool.map(run_cell, todo)
            for row, ok in results:
                _append_row(cfg.out, row)
                done[_key_of(row)] = row
                stalled += not ok
    else:
        for cell in todo:
            row, ok = run_cell(cell)
            _append_row(cfg.out, row)
            done[_key_of(row)] = row
            stalled += not ok
    _, rows = ff.read_csv(cfg.out)
    ff.write_csv(cfg.out, SWEEP_COLUMNS, sorted(rows, key=_key_of))
    print(f"{len(todo)} new cell(s), {len(rows)} row(s) in {cfg.out}")
    if stalled:
        raise NonConvergence(f"{stalled} cell(s) had a node solver hit the iteration cap")
    return EXIT_OK


# -- diagnose --------------------------------------------------------------------------------

def _diag_row(probe, item, value, reference="", passed=""):
    return {"probe": probe, "item": item, "value": value, "reference": reference,
            "passed": "" if passed == "" else str(bool(passed)).lower()}


def _probe_rows(name, model, opts, beta):
    n = model.n
    node = (opts["node"] or n) - 1
    seed = opts["seed"]
    if name == "ratios":
        r = likelihood_ratio_probe(model)
        return [_diag_row(name, "max_ratio_over_bound", r, 1.0, r <= 1 + 1e-9)]
    if name == "stationarity":
        s, db = stationarity_residuals(model)
        return [_diag_row(name, "max_abs_piP_minus_pi", s, 1e-10, s <= 1e-10),
                _diag_row(name, "max_detailed_balance_gap", db, 1e-10, db <= 1e-10)]
    if name == "good-event":
        est = good_event_probe(model, schedule_for(opts, n), node, opts["intervals"],
                               seed_sequence(seed, "good-event", node))
        rows = []
        for j in range(n):
            if j == node:
                continue
            floor = est.delta - 3 * est.stderr[j]
            rows.append(_diag_row(name, f"site{j + 1}", est.probability[j], floor, est.probability[j] >= floor))
        return rows
    if name == "tap":
        if beta is None:
            raise ConfigError("tap probe needs --beta")
        q = rs_fixed_point(beta, opts["field_mu"], opts["field_sigma2"] if opts["field"] == "gaussian" else 0.0).q
        if n <= MAX_BLOCK_SIZE:
            m = exact_distribution(model).mean()
        else:
            m, _ = chain_mean(model, 2000 * n, derive_rng(seed, "tap-chain"))
        res = tap_residual(model, m, beta, q, opts["delta"])
        rows = [_diag_row(name, f"site{i + 1}", res.residual[i]) for i in range(n)]
        rows.append(_diag_row(name, "max_abs", res.max_abs, res.reference, res.max_abs <= res.reference))
        return rows
    if name == "sk-check":
        if n <= MAX_BLOCK_SIZE:
            X = exact_sample(exact_distribution(model), derive_rng(seed, "sk-samples"), size=opts["samples"])
        else:
            burn = 100 * n
            x0 = (2 * derive_rng(seed, "x0").integers(0, 2, size=n) - 1).astype(np.int8)
            traj = run(model, BlockSchedule.glauber(), x0, burn + n * opts["samples"], seed_sequence(seed, "sk"))
            X = traj.configs[burn::n][: opts["samples"]]
        rep = sk_condition_check(model, X)
        rows = [_diag_row(name, "max_row_l2", rep.max_row_l2), _diag_row(name, "opnorm", rep.opnorm),
                _diag_row(name, "C", rep.C), _diag_row(name, "degenerate", int(rep.degenerate))]
        rows += [_diag_row(name, f"fraction_site{i + 1}", f, 0.75, f >= 0.75) for i, f in enumerate(rep.fractions)]
        return rows
    if name == "condition2":
        w_star = np.delete(model.couplings[node], node)
        h_star = model.fields[node]
        grid = [(w_star, h_star)]
        for k in range(n - 1):
            for shift in (-1.0, -0.5, 0.5, 1.0):
                w = w_star.copy()
                w[k] += shift
                grid.append((w, h_star))
        tab = metatheorem_condition2_probe(model, node, grid)
        return [_diag_row(name, "constant_c", tab.constant, 0.0, tab.constant > 0)]
    raise ConfigError(f"unknown probe {name!r}; choose from {', '.join(PROBES)}")


def cmd_diagnose(opts) -> int:
    """Run diagnostic probes on a model and write a diagnostics CSV."""
    if opts["model"]:
        model = ff.read_model(_existing(opts["model"], "model file"))
    else:
        _require(opts, "family", "n")
        model = build_model(opts["family"], opts["n"], opts["beta"], opts["seed"], opts["d"], opts["strength"],
                            field_spec(opts))
    beta = opts["beta"]
    if beta is None and opts["family"] == "sk" and not opts["model"]:
        beta = 0.0
    probes = list(PROBES) if opts["probes"] == ["all"] else opts["probes"]
    rows = []
    for name in probes:
        rows += _probe_rows(name, model, opts, beta)
    if opts["out"]:
        ff.write_csv(opts["out"], DIAG_COLUMNS, rows)
    for r in rows:
        print(",".join(str(ff._cell(r[c])) for c in DIAG_COLUMNS))
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args.command, args)
        return globals()[f"cmd_{args.command}"](opts)
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConvergenceError, NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ConfigError, ff.FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
