"""Experiment orchestration: configuration, sweeps, adaptive refinement, output.

Every experiment returns a :class:`ResultTable` whose rows are produced in
a fixed order, so CSV and JSON output is reproducible byte for byte.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AssumptionError, ConfigError, NumericalError
from .estimator import (
    GAP_MODES,
    GAP_NONGUARANTEED,
    GAP_ORACLE,
    GAP_WEYL,
    REMAINDER_LAST,
    REMAINDER_NEXT,
    EstimatorSetup,
    atomic_subdomains,
    bound_eigen,
    bound_source,
    gap_constants,
    local_indicators,
    partial_dual_norm,
    prepare_estimator,
    true_errors,
)
from .gridnum import Grid, solve_tridiag
from .lcao import (
    AOBasis,
    assemble_galerkin,
    galerkin_eig_solve,
    galerkin_source_solve,
    project_source,
    source_term_eval,
)
from .model import (
    MolecularSystem,
    ReferenceSolution,
    assemble_atomic_operator,
    box_grid,
    reference_solve,
    weyl_lower_bound,
)
from .partition import GUARANTEED, OPTIMAL, PartitionOfUnity, constant_C, constant_cA

KINDS = ("source-sweep", "eig-sweep", "adaptive", "constants", "spectral-convergence")
CA_MODES = (OPTIMAL, GUARANTEED)
REMAINDER_RULES = (REMAINDER_NEXT, REMAINDER_LAST)

EIG_COLUMNS = ["N", "n1", "n2", "lambda_1N", "lambda_ref", "err_A", "err_eig", "bound_A", "bound_eig",
               "r_tilde_sq", "eta1_sq", "eta2_sq", "eta3_sq", "C", "c_A", "inv_gamma", "inv_gamma_hat"]
SOURCE_COLUMNS = ["N", "n1", "n2", "err_A", "bound_A", "r_tilde_sq", "r_tilde_lower_sq",
                  "eta1_sq", "eta2_sq", "eta3_sq", "C", "c_A"]
ADAPTIVE_COLUMNS = ["iter", "N", "n1", "n2", "eta1_sq", "eta2_sq", "chosen", "lambda_1N",
                    "err_A", "bound_A"]
CONSTANT_COLUMNS = ["table", "ell", "sigma", "sigma_atomic", "C", "c_A", "inv_gamma",
                    "inv_gamma_hat", "lambda_1", "lambda_2"]
SPECTRAL_COLUMNS = ["J", "k", "sample", "lower", "upper", "gap", "exact"]

# rows of the two sensitivity tables
C_TABLE_ELLS = (0.1, 0.3, 0.5, 0.8, 0.9)
C_TABLE_SHIFTS = (5.0, 3.0, 2.0, 1.0)
GAP_TABLE_SIGMAS = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
SPECTRAL_JS = (5, 9, 13, 17)


@dataclass(frozen=True)
class ExperimentConfig:
    """All parameters of one experiment.

    The first block mirrors the configuration-file keys; the mode flags are
    set from the command line.  ``ell`` is the half-width of the partition
    transition zones (``a_min = R - ell``, ``a_max = R + ell``).  Sweeps run
    over even total sizes ``N = n_min, n_min + 2, ..., n_max`` with
    ``n1 = n2 = N/2``; the adaptive loop starts at ``(n1, n2)`` and stops
    at ``N = n_max``.
    """

    R: float = 1.0
    z_left: float = 1.0
    z_right: float = 1.0
    alpha: float = 0.5
    sigma: float = 4.0
    sigma1: float = 3.0
    sigma2: float = 3.0
    sigma3: float = 1.0
    ell: float = 0.4
    J: int = 17
    n1: int = 5
    n2: int = 5
    n_min: int = 4
    n_max: int = 60
    box_mult: float = 5.0
    n_grid: int = 2001
    kind: str = "eig-sweep"
    gap_mode: str = GAP_NONGUARANTEED
    ca_mode: str = OPTIMAL
    remainder: str = REMAINDER_NEXT
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.gap_mode not in GAP_MODES:
            raise ConfigError(f"unknown gap mode {self.gap_mode!r}")
        if self.ca_mode not in CA_MODES:
            raise ConfigError(f"unknown c_A mode {self.ca_mode!r}")
        if self.remainder not in REMAINDER_RULES:
            raise ConfigError(f"unknown remainder rule {self.remainder!r}")
        for name in ("J", "n1", "n2", "n_min", "n_max", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.n_min > self.n_max:
            raise ConfigError(f"empty sweep: n_min={self.n_min} > n_max={self.n_max}")
        if self.kind == "adaptive" and self.n_max <= self.n1 + self.n2:
            raise ConfigError("adaptive budget n_max must exceed n1 + n2")
        # constructing these validates the physical constraints
        self.system()
        self.partition()

    def system(self, **overrides) -> MolecularSystem:
        kw = dict(R=self.R, z_left=self.z_left, z_right=self.z_right, alpha=self.alpha,
                  sigma=self.sigma, sigma_1=self.sigma1, sigma_2=self.sigma2, sigma_3=self.sigma3)
        kw.update(overrides)
        return MolecularSystem(**kw)

    def partition(self, ell: Optional[float] = None) -> PartitionOfUnity:
        return PartitionOfUnity.from_ell(self.R, self.ell if ell is None else ell)

    def grid(self) -> Grid:
        return box_grid(self.system(), self.box_mult, self.n_grid)

    def sweep_sizes(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1, 2))


CONFIG_KEYS = ("R", "z_left", "z_right", "alpha", "sigma", "sigma1", "sigma2", "sigma3", "ell",
               "J", "n1", "n2", "n_min", "n_max", "box_mult", "n_grid", "kind")
_INT_KEYS = {"J", "n1", "n2", "n_min", "n_max", "n_grid"}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines into typed config fields.

    Blank lines and ``#`` comments are allowed.  Unknown or repeated keys
    and malformed values raise :class:`ConfigError`.
    """
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    out = {}
    for key, raw in parser["config"].items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        raw = raw.strip()
        try:
            if key == "kind":
                out[key] = raw
            elif key in _INT_KEYS:
                out[key] = int(raw)
            else:
                out[key] = float(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
        if key != "kind" and not math.isfinite(out[key]):
            raise ConfigError(f"{key} must be finite")
    return out


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a configuration file; ``overrides`` (mode flags, kind) take precedence."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    values = parse_config_text(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


@dataclass
class ResultTable:
    """Ordered columns and rows (dicts); missing entries serialise as empty."""

    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.rows if r.get("error")]

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) if r.get(name) is not None else np.nan for r in self.rows],
                        dtype=float)

    def output_columns(self) -> list[str]:
        cols = list(self.columns)
        if self.failed and "error" not in cols:
            cols.append("error")
        return cols


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v).replace("\n", " ")


def to_csv(table: ResultTable) -> str:
    """CSV text with floats at 17 significant digits and ``\\n`` line ends."""
    buf = io.StringIO()
    cols = table.output_columns()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in table.rows:
        writer.writerow([format_value(row.get(c)) for c in cols])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def to_json(table: ResultTable) -> str:
    cols = table.output_columns()
    rows = [{c: _json_value(r.get(c)) for c in cols} for r in table.rows]
    return json.dumps({"columns": cols, "rows": rows, "meta": {k: _json_value(v) for k, v in table.meta.items()}},
                      indent=1) + "\n"


def write_table(table: ResultTable, path, fmt: str = "csv") -> None:
    text = to_csv(table) if fmt == "csv" else to_json(table)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# shared per-configuration state


@dataclass(frozen=True)
class ExperimentContext:
    """Basis-independent quantities computed once per configuration."""

    cfg: ExperimentConfig
    system: MolecularSystem
    grid: Grid
    reference: ReferenceSolution
    setup: EstimatorSetup
    weyl: Optional[float]
    source: Optional[np.ndarray] = None
    source_reference: Optional[ReferenceSolution] = None

    @property
    def lambda_next_bound(self) -> Optional[float]:
        if self.cfg.gap_mode == GAP_ORACLE:
            return self.reference.lambda_2
        if self.cfg.gap_mode == GAP_WEYL:
            return self.weyl
        return None


def build_context(cfg: ExperimentConfig, with_source: bool = False) -> ExperimentContext:
    system = cfg.system()
    grid = cfg.grid()
    ref = reference_solve(grid, system, "eigen")
    c_A = constant_cA(system, cfg.ca_mode, ref)
    pu = cfg.partition()
    C = constant_C(pu, system, c_A, grid.x_min, grid.x_max, n_samples=4 * grid.n_points + 4)
    setup = prepare_estimator(grid, system, pu, cfg.J, C, c_A, cfg.remainder)
    weyl = weyl_lower_bound(grid, system) if cfg.gap_mode == GAP_WEYL else None
    src = src_ref = None
    if with_source:
        src = source_term_eval(system, grid.points)
        src_ref = reference_solve(grid, system, "source", src)
    return ExperimentContext(cfg, system, grid, ref, setup, weyl, src, src_ref)


def split_sizes(N: int) -> tuple[int, int]:
    n1 = N // 2
    return n1, N - n1


def _point_failure(row: dict, exc: Exception) -> dict:
    row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def eigen_point(ctx: ExperimentContext, n1: int, n2: int, with_far: bool = True) -> dict:
    """Galerkin ground state, bounds and true errors for one basis size."""
    mats = assemble_galerkin(ctx.grid, ctx.system, AOBasis.diatomic(ctx.system.R, n1, n2))
    sol = galerkin_eig_solve(mats, 1, ctx.reference)
    lower_next = ctx.lambda_next_bound
    if lower_next is None:
        lower_next = sol.lambda_next
    gaps = gap_constants(sol.lambda_iN, lower_next, mode=ctx.cfg.gap_mode)
    rep = bound_eigen(ctx.setup, sol, gaps)
    err_A, err_eig = true_errors(ctx.reference, sol, ctx.grid, ctx.system)
    return {
        "N": n1 + n2, "n1": n1, "n2": n2, "lambda_1N": sol.lambda_iN, "lambda_ref": ctx.reference.lambda_1,
        "err_A": err_A, "err_eig": err_eig, "bound_A": rep.bound_A, "bound_eig": rep.bound_eig,
        "r_tilde_sq": rep.r_tilde_sq, "eta1_sq": rep.eta_sq[0], "eta2_sq": rep.eta_sq[1],
        "eta3_sq": rep.eta_sq[2], "C": rep.C, "c_A": rep.c_A,
        "inv_gamma": gaps.inv_gamma, "inv_gamma_hat": gaps.inv_gamma_hat,
    }


def source_point(ctx: ExperimentContext, n1: int, n2: int) -> dict:
    mats = assemble_galerkin(ctx.grid, ctx.system, AOBasis.diatomic(ctx.system.R, n1, n2))
    sol = galerkin_source_solve(mats, project_source(mats, ctx.source), ctx.source)
    rep = bound_source(ctx.setup, sol)
    err_A, _ = true_errors(ctx.source_reference, sol, ctx.grid, ctx.system)
    return {
        "N": n1 + n2, "n1": n1, "n2": n2, "err_A": err_A, "bound_A": rep.bound_A,
        "r_tilde_sq": rep.r_tilde_sq, "r_tilde_lower_sq": rep.r_tilde_lower_sq,
        "eta1_sq": rep.eta_sq[0], "eta2_sq": rep.eta_sq[1], "eta3_sq": rep.eta_sq[2],
        "C": rep.C, "c_A": rep.c_A,
    }


def _guarded(fn: Callable[..., dict], ctx, n1: int, n2: int) -> dict:
    try:
        return fn(ctx, n1, n2)
    except (NumericalError, AssumptionError) as exc:
        return _point_failure({"N": n1 + n2, "n1": n1, "n2": n2}, exc)


def _ordered_map(fn, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _sweep(cfg: ExperimentConfig, point_fn, columns, with_source: bool) -> ResultTable:
    ctx = build_context(cfg, with_source)
    sizes = [split_sizes(N) for N in cfg.sweep_sizes()]
    rows = _ordered_map(lambda s: _guarded(point_fn, ctx, *s), sizes, cfg.threads)
    return ResultTable(list(columns), rows, _meta(ctx))


def _meta(ctx: ExperimentContext) -> dict:
    return {"kind": ctx.cfg.kind, "gap_mode": ctx.cfg.gap_mode, "ca_mode": ctx.cfg.ca_mode,
            "remainder": ctx.cfg.remainder, "C": ctx.setup.C, "c_A": ctx.setup.c_A,
            "lambda_1": ctx.reference.lambda_1, "lambda_2": ctx.reference.lambda_2,
            "weyl_lambda_2": ctx.weyl}


def run_eig_sweep(cfg: ExperimentConfig) -> ResultTable:
    return _sweep(cfg, eigen_point, EIG_COLUMNS, False)


def run_source_sweep(cfg: ExperimentConfig) -> ResultTable:
    return _sweep(cfg, source_point, SOURCE_COLUMNS, True)


# ---------------------------------------------------------------------------
# adaptive refinement


@dataclass
class AdaptiveTrace:
    """Per-iteration records of the adaptive loop, plus failed attempts."""

    records: list[dict] = field(default_factory=list)

    @property
    def accepted(self) -> list[dict]:
        return [r for r in self.records if not r.get("error")]

    def sizes(self) -> list[tuple[int, int]]:
        return [(r["n1"], r["n2"]) for r in self.accepted]


def choose_atom(etas: Sequence[float]) -> int:
    """Index (1-based) of the largest indicator; ties go to the lowest index."""
    return int(np.argmax(np.asarray(etas, dtype=float))) + 1


def _adaptive_eval(ctx: ExperimentContext, n1: int, n2: int) -> dict:
    mats = assemble_galerkin(ctx.grid, ctx.system, AOBasis.diatomic(ctx.system.R, n1, n2))
    sol = galerkin_eig_solve(mats, 1, ctx.reference)
    eta1, eta2, _ = local_indicators(ctx.setup, sol.residual(), with_far=False)
    lower_next = ctx.lambda_next_bound
    if lower_next is None:
        lower_next = sol.lambda_next
    rep = bound_eigen(ctx.setup, sol, gap_constants(sol.lambda_iN, lower_next, mode=ctx.cfg.gap_mode))
    err_A, _ = true_errors(ctx.reference, sol, ctx.grid, ctx.system)
    return {"N": n1 + n2, "n1": n1, "n2": n2, "eta1_sq": eta1, "eta2_sq": eta2,
            "lambda_1N": sol.lambda_iN, "err_A": err_A, "bound_A": rep.bound_A}


def adaptive_refine(cfg: ExperimentConfig, start: Optional[tuple[int, int]] = None,
                    budget: Optional[int] = None, ctx: Optional[ExperimentContext] = None) -> AdaptiveTrace:
    """Greedy atom-wise refinement driven by the local indicators.

    At every step the atom with the largest indicator gets one more
    function, until the total size reaches ``budget``.  If the enlarged
    basis cannot be solved the failure is recorded and the other atom is
    tried; the loop stops when neither works.
    """
    n1, n2 = start if start is not None else (cfg.n1, cfg.n2)
    budget = cfg.n_max if budget is None else budget
    if n1 < 1 or n2 < 1 or budget <= n1 + n2:
        raise ConfigError("adaptive run needs positive start sizes and a budget above their sum")
    ctx = build_context(cfg) if ctx is None else ctx
    trace = AdaptiveTrace()
    current = _adaptive_eval(ctx, n1, n2)
    it = 0
    while True:
        etas = (current["eta1_sq"], current["eta2_sq"])
        k0 = choose_atom(etas)
        trace.records.append({"iter": it, **current, "chosen": k0})
        if current["N"] >= budget:
            break
        order = sorted((1, 2), key=lambda k: (-etas[k - 1], k))
        nxt = None
        for k in order:
            cand = (current["n1"] + (k == 1), current["n2"] + (k == 2))
            try:
                nxt = _adaptive_eval(ctx, *cand)
                break
            except (NumericalError, AssumptionError) as exc:
                trace.records.append(_point_failure({"iter": it, "N": sum(cand), "n1": cand[0],
                                                     "n2": cand[1], "chosen": k}, exc))
        if nxt is None:
            break
        current = nxt
        it += 1
    return trace


def uniform_refine(cfg: ExperimentConfig, sizes: Sequence[int],
                   ctx: Optional[ExperimentContext] = None) -> list[dict]:
    """Baseline with ``n1 = n2 = N/2`` at each total size ``N``."""
    ctx = build_context(cfg) if ctx is None else ctx
    return _ordered_map(lambda N: _guarded(_adaptive_eval, ctx, *split_sizes(N)), list(sizes), cfg.threads)


def run_adaptive(cfg: ExperimentConfig) -> ResultTable:
    ctx = build_context(cfg)
    trace = adaptive_refine(cfg, ctx=ctx)
    return ResultTable(list(ADAPTIVE_COLUMNS), trace.records, _meta(ctx))


# ---------------------------------------------------------------------------
# constants and spectral convergence


def run_constants(cfg: ExperimentConfig) -> ResultTable:
    """Rows of the ``C`` sensitivity table and the gap sensitivity table.

    ``C`` rows vary the transition half-width and the common atomic shift at
    the configured global shift.  Gap rows vary the global shift, using the
    reference eigenvalues for both ``lambda_1N`` and the next-eigenvalue
    bound.
    """
    base = cfg.system()
    grid = cfg.grid()
    n_samples = 4 * grid.n_points + 4
    ref = reference_solve(grid, base, "eigen")
    c_A = constant_cA(base, cfg.ca_mode, ref)

    def c_row(item):
        ell, sa = item
        system = cfg.system(sigma_1=sa, sigma_2=sa)
        C = constant_C(cfg.partition(ell), system, c_A, grid.x_min, grid.x_max, n_samples)
        return {"table": "C", "ell": ell, "sigma": base.sigma, "sigma_atomic": sa, "C": C, "c_A": c_A,
                "lambda_1": ref.lambda_1, "lambda_2": ref.lambda_2}

    def gap_row(sigma):
        system = cfg.system(sigma=sigma)
        try:
            r = reference_solve(grid, system, "eigen")
            g = gap_constants(r.lambda_1, r.lambda_2, mode=GAP_ORACLE)
            return {"table": "gap", "sigma": sigma, "c_A": constant_cA(system, cfg.ca_mode, r),
                    "inv_gamma": g.inv_gamma, "inv_gamma_hat": g.inv_gamma_hat,
                    "lambda_1": r.lambda_1, "lambda_2": r.lambda_2}
        except (NumericalError, AssumptionError) as exc:
            return _point_failure({"table": "gap", "sigma": sigma}, exc)

    items = [(ell, sa) for ell in C_TABLE_ELLS for sa in C_TABLE_SHIFTS]
    rows = _ordered_map(c_row, items, cfg.threads)
    rows += _ordered_map(gap_row, list(GAP_TABLE_SIGMAS), cfg.threads)
    return ResultTable(list(CONSTANT_COLUMNS), rows, {"kind": cfg.kind, "ca_mode": cfg.ca_mode})


def run_spectral_convergence(cfg: ExperimentConfig, Js: Sequence[int] = SPECTRAL_JS) -> ResultTable:
    """Two-sided dual norms of the localised residual for growing truncation.

    Uses the ground-state residual at ``(n1, n2)``; the exact value comes
    from a direct solve with each atomic operator.
    """
    rows = []
    ctx = None
    for J in Js:
        ctx = build_context(replace(cfg, J=int(J)))
        mats = assemble_galerkin(ctx.grid, ctx.system, AOBasis.diatomic(ctx.system.R, cfg.n1, cfg.n2))
        res = galerkin_eig_solve(mats, 1, ctx.reference).residual()
        for k, sb in enumerate(ctx.setup.spectral):
            v = (ctx.setup.sqrt_p[k] * res)[sb.grid_slice]
            parts = partial_dual_norm(sb, v, cfg.remainder)
            rows.append({"J": int(J), "k": k + 1, "sample": "residual", "lower": parts.lower,
                         "upper": parts.upper, "gap": parts.upper - parts.lower,
                         "exact": exact_dual_norm(ctx, k, v)})
    return ResultTable(list(SPECTRAL_COLUMNS), rows, _meta(ctx) if ctx else {})


def exact_dual_norm(ctx: ExperimentContext, k: int, v: np.ndarray) -> float:
    """``<v, A_k^-1 v>`` by a direct tridiagonal solve on the subdomain."""
    sub = atomic_subdomains(ctx.grid, ctx.system, ctx.setup.partition)[k]
    op = assemble_atomic_operator(ctx.grid, sub, ctx.system.charges[k], ctx.system.alpha,
                                  ctx.system.atomic_shifts[k])
    return float(ctx.grid.h * (v @ solve_tridiag(op, v)))


RUNNERS = {
    "source-sweep": run_source_sweep,
    "eig-sweep": run_eig_sweep,
    "adaptive": run_adaptive,
    "constants": run_constants,
    "spectral-convergence": run_spectral_convergence,
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Dispatch on ``cfg.kind``."""
    return RUNNERS[cfg.kind](cfg)
