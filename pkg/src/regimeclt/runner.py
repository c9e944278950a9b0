"""Scenario orchestration: config parsing, experiment pipelines, reports.

Experiments
-----------
mixing        geometric-decay certificate for the chain's n-step gaps
independence  exact conditional and joint-product gaps with envelopes
cf_gap        Monte Carlo characteristic-function factorization gap
clt           normal-convergence measurements plus block/remainder checks

Every run writes report.json, tables.csv (long format; each row carries its
theoretical bound where one exists), and manifest.json into a directory
named after the scenario. Reports and tables are byte-identical across
reruns of the same scenario; the timestamp lives only in the manifest. A
bound_scale below 1 shrinks every envelope and is the supported way to
inject faults when exercising the exit-code contract.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import __version__
from .chain import is_ergodic, mixing_rate, stationary_distribution
from .charfn import build_step_approximation, cf_factorization_gap, truncation_radius
from .clt import clt_convergence, decompose, remainder_diagnostic
from .errors import BoundViolated, ConfigInvalid, RegimecltError
from .independence import (
    BOUND_SLACK,
    chained_gap_bound,
    conditional_gap_exact,
    default_event_family,
    epsilon_certificate,
    joint_product_gap,
)
from .process import ModelSpec, mixture_abs_third_moment
from .seeds import SeedSpec

SCHEMA_VERSION = 1
EXPERIMENTS = ("mixing", "independence", "cf_gap", "clt")

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

_PARAM_DEFAULTS: dict[str, dict] = {
    "mixing": {"s_max": 50},
    "independence": {
        "tau_grid": list(range(1, 11)),
        "lags": [5, 5],
        "quantile_levels": [0.25, 0.5, 0.75],
    },
    "cf_gap": {
        "lags": [5, 5],
        "t_grid": [0.5, 1.0, 2.0],
        "replicates": 100_000,
        "eta": 0.05,
        "quantile_levels": [round(0.05 * i, 2) for i in range(1, 20)],
    },
    "clt": {
        "n_grid": [100, 400, 1600],
        "replicates": 2000,
        "t_grid": [0.5, 1.0, 2.0],
        "eta_grid": [0.1, 0.5, 1.0],
        "alpha_exp": 0.25,
        "m": 2,
        "remainder_replicates": 400,
        "batches": 2000,
        "lindeberg_replicates": 200_000,
    },
}

_INT_PARAMS = {"s_max", "replicates", "m", "remainder_replicates", "batches", "lindeberg_replicates"}
_INT_LIST_PARAMS = {"tau_grid", "lags", "n_grid"}
_FLOAT_LIST_PARAMS = {"t_grid", "eta_grid", "quantile_levels"}
_FLOAT_PARAMS = {"eta", "alpha_exp"}


def _normalize_params(experiment: str, params: Mapping) -> dict:
    merged = {k: (list(v) if isinstance(v, list) else v)
              for k, v in _PARAM_DEFAULTS[experiment].items()}
    for key, value in dict(params).items():
        if key not in merged:
            known = ", ".join(sorted(merged))
            raise ConfigInvalid(f"unknown parameter {key!r} for experiment {experiment!r} (known: {known})")
        merged[key] = value
    for key, value in merged.items():
        try:
            if key in _INT_PARAMS:
                merged[key] = _as_int(value, key, minimum=1)
            elif key in _FLOAT_PARAMS:
                merged[key] = _as_float(value, key)
            elif key in _INT_LIST_PARAMS:
                merged[key] = [_as_int(v, key, minimum=1) for v in _as_list(value, key)]
            elif key in _FLOAT_LIST_PARAMS:
                merged[key] = [_as_float(v, key) for v in _as_list(value, key)]
        except ConfigInvalid:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"parameter {key!r}: {exc}") from exc
    return merged


def _as_list(value, key) -> list:
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ConfigInvalid(f"parameter {key!r} must be a nonempty list")
    return list(value)


def _as_int(value, key, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigInvalid(f"parameter {key!r} must be an integer, got {value!r}")
    iv = int(value)
    if iv < minimum:
        raise ConfigInvalid(f"parameter {key!r} must be >= {minimum}, got {iv}")
    return iv


def _as_float(value, key) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigInvalid(f"parameter {key!r} must be a finite number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class Scenario:
    """One named, fully specified experiment configuration."""

    name: str
    experiment: str
    model: ModelSpec
    seed: SeedSpec
    params: dict = field(default_factory=dict)
    bound_scale: float = 1.0

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name):
            raise ConfigInvalid(
                f"scenario name {self.name!r} must match {_NAME_RE.pattern} (it becomes a directory)"
            )
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(
                f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}"
            )
        if not (isinstance(self.bound_scale, (int, float)) and 0.0 < float(self.bound_scale) < math.inf):
            raise ConfigInvalid("bound_scale must be a positive finite number")
        object.__setattr__(self, "bound_scale", float(self.bound_scale))
        object.__setattr__(self, "params", _normalize_params(self.experiment, self.params))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "experiment": self.experiment,
            "model": self.model.to_json_dict(),
            "seed": self.seed.to_json_dict(),
            "params": self.params,
            "bound_scale": self.bound_scale,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Scenario":
        if not isinstance(obj, dict):
            raise ConfigInvalid("scenario must be a JSON object")
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigInvalid(f"unsupported schema_version {version!r}; this tool reads {SCHEMA_VERSION}")
        allowed = {"schema_version", "name", "experiment", "model", "seed", "params", "bound_scale"}
        unknown = set(obj) - allowed
        if unknown:
            raise ConfigInvalid(f"unknown scenario fields: {', '.join(sorted(unknown))}")
        for required in ("name", "experiment", "model"):
            if required not in obj:
                raise ConfigInvalid(f"scenario is missing required field {required!r}")
        try:
            model = ModelSpec.from_json_dict(obj["model"])
        except (RegimecltError, ValueError, KeyError, TypeError) as exc:
            raise ConfigInvalid(f"invalid model: {exc}") from exc
        seed_obj = obj.get("seed", 0)
        try:
            if isinstance(seed_obj, dict):
                seed = SeedSpec.from_json_dict(seed_obj)
            else:
                seed = SeedSpec(int(seed_obj))
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigInvalid(f"invalid seed: {exc}") from exc
        return cls(
            name=str(obj["name"]),
            experiment=str(obj["experiment"]),
            model=model,
            seed=seed,
            params=obj.get("params", {}),
            bound_scale=obj.get("bound_scale", 1.0),
        )

    def with_overrides(self, seed: int | None = None, replicates: int | None = None) -> "Scenario":
        """Copy with the CLI-level overrides applied.

        The replicates override touches only experiments that have a
        replicates parameter; elsewhere it is ignored.
        """
        new_seed = self.seed if seed is None else SeedSpec(int(seed))
        params = dict(self.params)
        if replicates is not None and "replicates" in _PARAM_DEFAULTS[self.experiment]:
            params["replicates"] = int(replicates)
        return dataclasses.replace(self, seed=new_seed, params=params)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; ConfigInvalid carries the location."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read scenario file {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return Scenario.from_json_dict(obj)


# ---------------------------------------------------------------------------
# experiment pipelines
# ---------------------------------------------------------------------------

# Report row: (section, label, value, std_error or None, bound or None).
Row = tuple[str, str, float, float | None, float | None]


def _check(rows: list[Row], violations: list[str], section: str, label: str,
           value: float, std_error: float | None, bound: float | None,
           se_slack: float = 3.0) -> None:
    rows.append((section, label, value, std_error, bound))
    if bound is None:
        return
    allowance = bound + BOUND_SLACK + (0.0 if std_error is None else se_slack * std_error)
    if value > allowance:
        violations.append(f"{section}[{label}]: value {value!r} exceeds bound {bound!r}")


def _require_ergodic(model: ModelSpec) -> None:
    verdict = is_ergodic(model.chain)
    if not verdict:
        raise ConfigInvalid(f"scenario chain is not ergodic: {verdict.reason}")


def _experiment_mixing(scenario: Scenario) -> tuple[dict, list[Row], list[str]]:
    _require_ergodic(scenario.model)
    params = scenario.params
    chain = scenario.model.chain
    prof = mixing_rate(chain, s_max=params["s_max"])
    pi = stationary_distribution(chain).pi
    rows: list[Row] = []
    violations: list[str] = []
    for s, gap in prof.gaps:
        _check(rows, violations, "mixing", f"s={s}", gap, None,
               scenario.bound_scale * prof.bound(s))
    results = {
        "alpha": prof.alpha,
        "c": prof.c,
        "stationary": [float(v) for v in pi],
        "s_max": params["s_max"],
        "max_gap": max((g for _s, g in prof.gaps), default=0.0),
    }
    return results, rows, violations


def _experiment_independence(scenario: Scenario) -> tuple[dict, list[Row], list[str]]:
    _require_ergodic(scenario.model)
    model = scenario.model
    params = scenario.params
    tau_grid = params["tau_grid"]
    lags = params["lags"]
    scale = scenario.bound_scale
    prof = mixing_rate(model.chain, s_max=max(max(tau_grid), sum(lags), 2))
    family = default_event_family(model, quantile_levels=params["quantile_levels"])
    # The 2 c alpha^tau envelope is certified for single-regime targets;
    # conditioning events are unrestricted but must have positive stationary
    # probability (bounded emissions can empty a low-quantile regime event).
    pi = model.stationary()
    conds = [ev for ev in family if float(pi @ ev.weights(model)) > 0.0]
    targets = [ev for ev in family if len(ev.state_set) == 1]
    rows: list[Row] = []
    violations: list[str] = []
    for tau in tau_grid:
        for target in targets:
            for cond in conds:
                rep = conditional_gap_exact(model, target, cond, tau, profile=prof)
                _check(rows, violations, "conditional",
                       f"tau={tau} target={target.describe()} given={cond.describe()}",
                       rep.gap_estimate, None, scale * rep.theoretical_bound)
    chained = chained_gap_bound(prof, lags)
    lag_label = ",".join(str(t) for t in lags)
    for ev in targets:
        rep = joint_product_gap(model, [ev] * (len(lags) + 1), lags, method="exact", profile=prof)
        _check(rows, violations, "joint", f"lags={lag_label} event={ev.describe()}",
               rep.gap_estimate, None, scale * chained)
    eps = epsilon_certificate(model, lags, profile=prof)
    _check(rows, violations, "epsilon", f"lags={lag_label}", eps, None, scale * chained)
    results = {
        "alpha": prof.alpha,
        "c": prof.c,
        "epsilon_hat": eps,
        "chained_bound": chained,
        "lags": list(lags),
        "n_conditional_rows": len(tau_grid) * len(targets) * len(conds),
    }
    return results, rows, violations


def _experiment_cf_gap(scenario: Scenario) -> tuple[dict, list[Row], list[str]]:
    _require_ergodic(scenario.model)
    model = scenario.model
    params = scenario.params
    lags = params["lags"]
    scale = scenario.bound_scale
    # The certificate family must keep the regime-aware rectangles: with
    # observation-only rectangles the exact gap can exceed 2 eps (the
    # two-point gap is pi_1 pi_2 alpha^tau |phi_1 - phi_2|^2, which beats
    # twice the best rectangle gap once |phi_1 - phi_2| passes sqrt(2) times
    # the sup distribution-function distance).
    eps = epsilon_certificate(
        model, lags,
        base_events=default_event_family(model, params["quantile_levels"]),
    )
    rep = cf_factorization_gap(
        model, lags, params["t_grid"], replicates=params["replicates"],
        seed=scenario.seed.child(1),
    )
    rows: list[Row] = []
    violations: list[str] = []
    for t, gap, se in zip(rep.t_grid, rep.gaps, rep.std_errors):
        # 4 SE is part of the stated envelope, not extra noise allowance.
        _check(rows, violations, "cf_gap", f"t={float(t)!r}", float(gap), float(se),
               scale * (2.0 * eps + 4.0 * float(se)), se_slack=0.0)
    radius = truncation_radius(model, params["eta"])
    for t in params["t_grid"]:
        approx = build_step_approximation(t, params["eta"], radius)
        _check(rows, violations, "step", f"t={t!r} cells={approx.n_cells}",
               approx.sup_error, None, scale * params["eta"])
    results = {
        "epsilon_hat": eps,
        "lags": list(lags),
        "replicates": params["replicates"],
        "truncation_radius": radius,
        "max_gap": rep.max_gap,
    }
    return results, rows, violations


def _experiment_clt(scenario: Scenario) -> tuple[dict, list[Row], list[str]]:
    _require_ergodic(scenario.model)
    model = scenario.model
    params = scenario.params
    scale = scenario.bound_scale
    report = clt_convergence(
        model,
        params["n_grid"],
        replicates=params["replicates"],
        t_grid=params["t_grid"],
        seed=scenario.seed,
        eta_grid=params["eta_grid"],
        batches=params["batches"],
        lindeberg_replicates=params["lindeberg_replicates"],
    )
    rows: list[Row] = []
    violations: list[str] = []
    for i, n in enumerate(report.n_grid):
        _check(rows, violations, "ks_distance", f"n={n}", report.ks_distance[i], None, None)
        _check(rows, violations, "cf_distance", f"n={n}", report.cf_distance[i], None, None)
        _check(rows, violations, "variance_ratio", f"n={n}", report.variance_ratio[i], None, None)
        for j, eta in enumerate(report.eta_grid):
            _check(rows, violations, "lindeberg", f"n={n} eta={eta!r}",
                   float(report.lindeberg_values[i, j]), None, None)

    n_max = max(report.n_grid)
    d = decompose(n_max, params["alpha_exp"], params["m"])
    rem = remainder_diagnostic(
        model, d, replicates=params["remainder_replicates"], seed=scenario.seed.child(32)
    )
    r_moment = mixture_abs_third_moment(model)
    # p^2 R^2 / n dominates the remainder second moment only when R >= 1.
    rem_bound = scale * rem.bound if r_moment >= 1.0 else None
    _check(rows, violations, "remainder", f"n={n_max} k={d.k} m={d.m}",
           rem.estimate, rem.std_error, rem_bound)

    ks = report.ks_distance
    noise = 2.0 * 0.26 / math.sqrt(report.replicates)
    monotone = all(ks[i + 1] <= ks[i] + noise for i in range(len(ks) - 1))
    results = {
        "convergence": report.to_json_dict(),
        "normalizer": report.normalizer,
        "ks_monotone_within_noise": monotone,
        "block": {"n": d.n, "k": d.k, "nu": d.nu, "m": d.m, "p": d.p},
        "remainder": {
            "estimate": rem.estimate,
            "std_error": rem.std_error,
            "bound": rem.bound,
            "abs_third_moment": r_moment,
        },
    }
    return results, rows, violations


_PIPELINES: dict[str, Callable[[Scenario], tuple[dict, list[Row], list[str]]]] = {
    "mixing": _experiment_mixing,
    "independence": _experiment_independence,
    "cf_gap": _experiment_cf_gap,
    "clt": _experiment_clt,
}


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows: Sequence[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "label", "value", "std_error", "bound"])
    for section, label, value, std_error, bound in rows:
        writer.writerow([
            section,
            label,
            repr(float(value)),
            "" if std_error is None else repr(float(std_error)),
            "" if bound is None else repr(float(bound)),
        ])
    return buf.getvalue()


@dataclass(frozen=True)
class RunResult:
    """Status and artifact locations for one executed scenario."""

    scenario: Scenario
    status: int
    violations: tuple[str, ...]
    report_path: Path
    csv_path: Path
    manifest_path: Path
    report: dict


def run_scenario(scenario: Scenario, out_dir, threads: int = 1) -> RunResult:
    """Execute one scenario and write its artifacts.

    Returns status 0 (all envelope checks passed) or 2 (at least one bound
    violated). Artifacts are written in both cases; report.json and
    tables.csv depend only on the scenario, never on wall-clock time or
    threads.
    """
    out_root = Path(out_dir)
    target = out_root / scenario.name
    target.mkdir(parents=True, exist_ok=True)

    results, rows, violations = _PIPELINES[scenario.experiment](scenario)
    status = 2 if violations else 0

    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.to_json_dict(),
        "results": results,
        "violations": list(violations),
        "status": status,
    }
    report_path = target / "report.json"
    csv_path = target / "tables.csv"
    manifest_path = target / "manifest.json"
    _atomic_write_text(report_path, json.dumps(report, sort_keys=True, indent=2) + "\n")
    _atomic_write_text(csv_path, _csv_text(rows))
    manifest = {
        "scenario_hash": scenario.content_hash(),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": scenario.seed.to_json_dict(),
        "threads": threads,
        "outputs": [report_path.name, csv_path.name],
        "status": status,
    }
    _atomic_write_text(manifest_path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return RunResult(
        scenario=scenario,
        status=status,
        violations=tuple(violations),
        report_path=report_path,
        csv_path=csv_path,
        manifest_path=manifest_path,
        report=report,
    )


def run(config_path, out_dir, seed: int | None = None, replicates: int | None = None,
        threads: int = 1) -> RunResult:
    """Load, override, execute; raise BoundViolated if any envelope failed.

    Artifacts are on disk before the exception is raised, so a failing run
    still leaves its evidence behind.
    """
    scenario = load_scenario(config_path).with_overrides(seed=seed, replicates=replicates)
    result = run_scenario(scenario, out_dir, threads=threads)
    if result.status == 2:
        raise BoundViolated(
            f"scenario {scenario.name!r}: {len(result.violations)} bound violation(s); "
            f"first: {result.violations[0]}"
        )
    return result


@dataclass(frozen=True)
class VerifySummary:
    """Per-scenario status table for a suite directory."""

    entries: tuple[dict, ...]
    summary_path: Path | None
    csv_path: Path | None

    @property
    def exit_code(self) -> int:
        codes = {e["status"] for e in self.entries}
        if 3 in codes:
            return 3
        if 1 in codes:
            return 1
        if 2 in codes:
            return 2
        return 0

    @property
    def n_failed(self) -> int:
        return sum(1 for e in self.entries if e["status"] != 0)


def verify_all(suite_dir, out_dir, threads: int = 1) -> VerifySummary:
    """Run every *.json scenario under suite_dir and tabulate the outcomes.

    Scenario failures do not stop the sweep: config problems record status
    1, bound violations 2, unexpected errors 3. An empty suite yields an
    empty summary with exit code 0.
    """
    suite = Path(suite_dir)
    if not suite.is_dir():
        raise ConfigInvalid(f"suite directory {suite} does not exist")
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    entries: list[dict] = []
    for path in sorted(suite.glob("*.json")):
        entry = {"file": path.name, "name": "", "experiment": "", "status": 0, "detail": ""}
        try:
            scenario = load_scenario(path)
            entry["name"] = scenario.name
            entry["experiment"] = scenario.experiment
            result = run_scenario(scenario, out_root, threads=threads)
            entry["status"] = result.status
            if result.violations:
                entry["detail"] = result.violations[0]
        except ConfigInvalid as exc:
            entry["status"] = 1
            entry["detail"] = str(exc)
        except Exception as exc:  # noqa: BLE001 -- a suite sweep must survive any scenario
            entry["status"] = 3
            entry["detail"] = f"{type(exc).__name__}: {exc}"
        entries.append(entry)

    summary_path = out_root / "summary.json"
    csv_path = out_root / "summary.csv"
    _atomic_write_text(summary_path, json.dumps({"scenarios": entries}, sort_keys=True, indent=2) + "\n")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "name", "experiment", "status", "detail"])
    for e in entries:
        writer.writerow([e["file"], e["name"], e["experiment"], e["status"], e["detail"]])
    _atomic_write_text(csv_path, buf.getvalue())
    return VerifySummary(entries=tuple(entries), summary_path=summary_path, csv_path=csv_path)
