"""Experiment configuration, grid orchestration and result persistence."""

import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace

from dplang.audit import audit_suite
from dplang.errors import ConfigError, InstanceError, NotContained
from dplang.generation import MODES, GenConfig, coverage_stats, estimate_gen_err
from dplang.hardness import empirical_lb_check, make_hard_instance
from dplang.identification import MECHANISMS, IdConfig, estimate_id_err
from dplang.instances import named_instance
from dplang.mechanisms import PrivacyParams
from dplang.schedules import linear_floor, parse_schedule
from dplang.stats import wilson_interval

log = logging.getLogger(__name__)

TASKS = ("identify", "generate", "lowerbound", "audit")
FORMATS = ("csv", "json-lines")
HEADER = (
    "task", "instance", "mechanism", "n", "epsilon", "delta", "f", "g", "h", "W", "trials", "failures",
    "estimate", "ci_low", "ci_high", "theoretical_bound", "lower_bound", "seed", "wall_time_ms",
)
_INT_FIELDS = {"n", "f", "g", "h", "W", "trials", "failures", "seed"}
_STR_FIELDS = {"task", "instance", "mechanism"}

# horizon floor used when no f schedule is given for identification
DEFAULT_ID_F = "sqrt-log:c=1,floor=12"
DEFAULT_GEN_F = 2
DEFAULT_LB_ID_F = 3
DEFAULT_INSTANCE = {"identify": "ipp", "generate": "iidp", "lowerbound": "ipp", "audit": "ipp"}
DEFAULT_MECHANISM = {"identify": "pure", "generate": "public", "lowerbound": None, "audit": None}


@dataclass
class ExperimentConfig:
    """One experiment: a task over an (n, epsilon) grid.

    Attributes:
        task: ``identify``, ``generate``, ``lowerbound`` or ``audit``.
        instance: Instance name, defaulting per task (for ``lowerbound``: ``ipp`` or ``iidp``,
            selecting the hard pair and hence the task bounded).
        mechanism: Identification mechanism or generation mode.
        n: Sample sizes.
        epsilon: Privacy levels.
        delta: Approximate-DP delta (0 for pure mechanisms).
        f: Horizon schedule (None for the task default).
        g: Coverage-threshold schedule (None derives floor(n p* / 2)).
        h: Threshold-range schedule (None uses twice the witness index).
        W: Public witness bound (None uses the instance default or the witness index).
        trials: Trials per grid point.
        seed: Master seed.
        collection: Optional collection config.
        out: Output path (None writes to stdout).
        format: ``csv`` or ``json-lines``.
        workers: Worker processes per grid point.
    """

    task: str = "identify"
    instance: str | None = None
    mechanism: str | None = None
    n: list = field(default_factory=lambda: [2000])
    epsilon: list = field(default_factory=lambda: [1.0])
    delta: float = 0.0
    f: object = None
    g: object = None
    h: object = None
    W: int | None = None
    trials: int = 1000
    seed: int = 0
    collection: object = None
    out: str | None = None
    format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Check field values, raising ConfigError naming the offending field."""
        if self.task not in TASKS:
            raise ConfigError("task", f"expected one of {TASKS}, got {self.task!r}")
        if self.mechanism is None:
            self.mechanism = DEFAULT_MECHANISM[self.task]
        if self.instance is None:
            self.instance = DEFAULT_INSTANCE[self.task]
        if self.task == "identify" and self.mechanism not in MECHANISMS:
            raise ConfigError("mechanism", f"identification mechanism must be one of {MECHANISMS}")
        if self.task == "generate" and self.mechanism not in MODES:
            raise ConfigError("mechanism", f"generation mode must be one of {MODES}")
        self.n = _as_list(self.n, "n", int)
        self.epsilon = _as_list(self.epsilon, "epsilon", float)
        if any(v < 1 for v in self.n):
            raise ConfigError("n", "sample sizes must be >= 1")
        if any(not (e > 0 and math.isfinite(e)) for e in self.epsilon):
            raise ConfigError("epsilon", "privacy levels must be positive and finite")
        try:
            self.delta = float(self.delta)
            self.trials = int(self.trials)
            self.seed = int(self.seed)
            self.workers = int(self.workers)
        except (TypeError, ValueError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not 0 <= self.delta < 1:
            raise ConfigError("delta", "delta must lie in [0, 1)")
        if self.mechanism in ("approximate", "approximate-joint") and self.delta == 0:
            raise ConfigError("delta", f"mechanism {self.mechanism!r} needs delta in (0, 1)")
        if self.trials < 1:
            raise ConfigError("trials", "trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "workers must be >= 1")
        if self.format not in FORMATS:
            raise ConfigError("format", f"expected one of {FORMATS}")
        if self.W is not None and int(self.W) < 1:
            raise ConfigError("W", "witness bound must be >= 1")
        for name in ("f", "g", "h"):
            if getattr(self, name) is not None:
                setattr(self, name, parse_schedule(getattr(self, name), name))
        if self.task == "lowerbound" and self.instance.lower() not in ("ipp", "iidp"):
            raise InstanceError(f"lowerbound needs instance 'ipp' or 'iidp', got {self.instance!r}")

    @classmethod
    def from_sources(cls, config=None, overrides=None):
        """Merge a JSON config document and explicit overrides (flag > config > default).

        Args:
            config: Path to a JSON file, a JSON string starting with ``{``, a dict, or None.
            overrides: Mapping of field values; entries equal to None are ignored.
        """
        doc = {}
        if isinstance(config, dict):
            doc = dict(config)
        elif isinstance(config, str):
            try:
                if config.lstrip().startswith("{"):
                    doc = json.loads(config)
                else:
                    with open(config, encoding="utf-8") as fh:
                        doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError("config", f"cannot read config: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "config document must be a JSON object")
        known = {f.name for f in fields(cls)}
        if "master_seed" in doc:
            doc["seed"] = doc.pop("master_seed")
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown config field")
        for key, value in (overrides or {}).items():
            if value is not None:
                doc[key] = value
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None

    def grid(self):
        """(grid_index, n, epsilon) triples in row-major order over n then epsilon."""
        k = len(self.epsilon)
        return [(a * k + b, n, e) for a, n in enumerate(self.n) for b, e in enumerate(self.epsilon)]


def _as_list(value, name, kind):
    if isinstance(value, (int, float, str)):
        value = [value]
    try:
        out = [kind(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(name, f"cannot parse {value!r}") from None
    if not out:
        raise ConfigError(name, "list must be nonempty")
    return out


@dataclass
class ResultRecord:
    """One grid point's outcome; serializable fields follow HEADER order.

    ``guaranteed`` and ``notes`` are kept in memory (and logged) but are not
    part of the persisted row.
    """

    task: str
    instance: str
    mechanism: str
    n: int
    epsilon: float
    delta: float
    f: int | None
    g: int | None
    h: int | None
    W: int | None
    trials: int
    failures: int
    estimate: float
    ci_low: float
    ci_high: float
    theoretical_bound: float | None
    lower_bound: float | None
    seed: int
    wall_time_ms: float
    guaranteed: bool | None = field(default=None, compare=False)
    notes: tuple = field(default=(), compare=False)
    passed: bool | None = field(default=None, compare=False)

    def values(self):
        return [getattr(self, k) for k in HEADER]


def _resolve_privacy(cfg, eps):
    delta = cfg.delta if cfg.mechanism in ("approximate", "approximate-joint") else 0.0
    return PrivacyParams(eps, delta)


def _run_identify(cfg, inst, grid, n, eps):
    idc = IdConfig(cfg.f or DEFAULT_ID_F, _resolve_privacy(cfg, eps), cfg.mechanism)
    est = estimate_id_err(inst, idc, n, cfg.trials, cfg.seed, grid, cfg.workers)
    return ResultRecord(
        "identify", inst.name, cfg.mechanism, n, eps, idc.privacy.delta, est.f, None, None, None,
        est.trials, est.failures, est.estimate, est.ci_low, est.ci_high, est.theoretical_bound, None,
        cfg.seed, est.wall_time_ms, est.guaranteed, tuple(est.notes),
        est.ci_low <= est.theoretical_bound or not est.guaranteed,
    )


def resolve_generation(cfg, inst, n):
    """Fill in default W, h and g for a generation run at sample size n.

    Returns:
        (f schedule, g schedule, h schedule, W, notes).
    """
    f_sched = cfg.f or parse_schedule(DEFAULT_GEN_F, "f")
    f = f_sched(n)
    notes = []
    W, h_sched = None, None
    if cfg.mechanism == "public":
        W = cfg.W if cfg.W is not None else inst.witness_bound
        if W is None:
            W = inst.witness(f)
        if W is None:
            raise ConfigError("W", "witness index not computable for this instance; pass --witness-bound")
    elif cfg.mechanism in ("joint", "approximate-joint"):
        h_sched = cfg.h
        if h_sched is None:
            w = inst.witness(f)
            if w is None:
                raise ConfigError("h", "witness index not computable for this instance; pass --h")
            h_sched = parse_schedule(2 * w, "h")
    g_sched = cfg.g
    if g_sched is None and cfg.mechanism != "nonprivate":
        horizon = W if W is not None else h_sched(n)
        ref = inst.reference_index(f)
        if ref is None:
            raise ConfigError("g", "no contained language within the horizon to derive g; pass --g")
        try:
            p_star = coverage_stats(inst.distribution, inst.collection.language(ref), horizon).p_star
        except NotContained as exc:
            raise ConfigError("g", str(exc)) from None
        g_sched = linear_floor(p_star)
        notes.append(f"g from floor(n p*/2) with p*={p_star!r}")
    return f_sched, g_sched, h_sched, W, notes


def _run_generate(cfg, inst, grid, n, eps):
    f_sched, g_sched, h_sched, W, notes = resolve_generation(cfg, inst, n)
    gc = GenConfig(f_sched, g_sched, _resolve_privacy(cfg, eps), cfg.mechanism, W, h_sched)
    est = estimate_gen_err(inst, gc, n, cfg.trials, cfg.seed, grid, cfg.workers)
    r = est.resolved
    bound = est.theoretical_bound
    ok = bound is None or not est.guaranteed or est.ci_low <= bound
    return ResultRecord(
        "generate", inst.name, cfg.mechanism, n, eps, gc.privacy.delta, r["f"], r["g"], r["h"], r["W"],
        est.trials, est.failures, est.estimate, est.ci_low, est.ci_high, bound, None, cfg.seed,
        est.wall_time_ms, est.guaranteed, tuple(notes) + tuple(est.notes), ok,
    )


def _run_lowerbound(cfg, grid, n, eps):
    t0 = time.perf_counter()
    variant = cfg.instance.lower()
    hard = make_hard_instance(variant.upper())
    privacy = PrivacyParams(eps, 0.0)
    if variant == "ipp":
        task = "identify"
        mech = cfg.mechanism or "pure"
        algo = IdConfig(cfg.f or DEFAULT_LB_ID_F, privacy, mech)
        resolved = {"f": algo.f_at(n), "g": None, "h": None, "W": None}
    else:
        task = "generate"
        mech = cfg.mechanism or "public"
        base = replace(cfg, mechanism=mech, task="generate")
        f_sched, g_sched, h_sched, W, _ = resolve_generation(base, hard.instance(False), n)
        algo = GenConfig(f_sched, g_sched, privacy, mech, W, h_sched)
        resolved = algo.resolve(n)
    check = empirical_lb_check(task, algo, n, eps, cfg.trials, cfg.seed, hard, cfg.workers, grid)
    if not check.applicable:
        raise ConfigError("mechanism", check.note)
    if task == "identify":
        failures = round(check.estimates["max_miss"] * cfg.trials)
    else:
        failures = round(max(check.estimates["alpha_D"], check.estimates["alpha_Dprime"]) * cfg.trials)
    low, high = wilson_interval(failures, cfg.trials)
    notes = tuple(f"{k}={v}" for k, v in check.checks.items())
    return ResultRecord(
        "lowerbound", f"{variant}-pair", mech, n, eps, 0.0, resolved["f"], resolved["g"], resolved["h"],
        resolved["W"], cfg.trials, failures, failures / cfg.trials, low, high, None, check.lower_bound.value,
        cfg.seed, (time.perf_counter() - t0) * 1000.0, None, notes, check.passed,
    )


def run_experiment(cfg):
    """Run every (n, epsilon) grid point of an identify, generate or lowerbound config.

    Raises:
        ConfigError: Invalid field, or ``task == "audit"`` (use :func:`run_audit`).
        InstanceError: Unknown instance name.
    """
    if cfg.task == "audit":
        raise ConfigError("task", "audit experiments produce AuditReports; use run_audit")
    inst = None
    if cfg.task in ("identify", "generate"):
        inst = named_instance(cfg.instance, cfg.collection, cfg.W)
    records = []
    for grid, n, eps in cfg.grid():
        if cfg.task == "identify":
            rec = _run_identify(cfg, inst, grid, n, eps)
        elif cfg.task == "generate":
            rec = _run_generate(cfg, inst, grid, n, eps)
        else:
            rec = _run_lowerbound(cfg, grid, n, eps)
        if rec.notes:
            log.info("%s n=%d eps=%g: %s", rec.task, n, eps, "; ".join(rec.notes))
        records.append(rec)
    return records


def run_audit(cfg):
    """Standard audit suite at ``cfg.epsilon`` with ``cfg.trials`` probes per audit."""
    instances = {"ipp": named_instance("ipp"), "iidp": named_instance("iidp")}
    return audit_suite(instances, epsilons=tuple(cfg.epsilon), pairs=cfg.trials, master_seed=cfg.seed)


def _render(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_value(value):
    if value is None:
        return "null"
    if isinstance(value, float):
        if not math.isfinite(value):
            return json.dumps(str(value))
        return format(value, ".17g")
    return json.dumps(value)


def format_results(records, fmt="csv", header=HEADER):
    """Render records (objects with the ``header`` attributes) as text."""
    if fmt not in FORMATS:
        raise ConfigError("format", f"expected one of {FORMATS}")
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for rec in records:
            writer.writerow([_render(getattr(rec, k)) for k in header])
    else:
        for rec in records:
            body = ", ".join(f"{json.dumps(k)}: {_json_value(getattr(rec, k))}" for k in header)
            buf.write("{" + body + "}\n")
    return buf.getvalue()


def emit_results(records, fmt="csv", path=None, header=HEADER):
    """Write records as CSV or JSON lines to ``path`` (stdout when None).

    Raises:
        OSError: The path cannot be written.
    """
    text = format_results(records, fmt, header)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _parse_field(key, raw):
    if raw is None or raw == "":
        return None
    if key in _STR_FIELDS:
        return raw
    if key in _INT_FIELDS:
        return int(raw)
    return float(raw)


def parse_results(text, fmt="csv"):
    """Parse emitted text back into ResultRecord objects."""
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and tuple(rows[0].keys()) != HEADER:
            raise ValueError("unexpected CSV header")
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [ResultRecord(**{k: _parse_field(k, row.get(k)) for k in HEADER}) for row in rows]


def read_results(path, fmt="csv"):
    """Read a results file written by :func:`emit_results`."""
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_results(fh.read(), fmt)
