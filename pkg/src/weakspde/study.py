"""Convergence studies over (N, h) grids, log-log rate fits and CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import covariance as cov
from .fem1d import build_space
from .laws import (
    Functional,
    continuous_law,
    discrete_law,
    expect_functional,
    semidiscrete_law,
    strong_error_sq,
    weak_error,
)
from .montecarlo import NoiseStream, SchemeSampler, mc_expect
from .spectral import ThetaScheme, build_dirichlet_laplacian_1d

log = logging.getLogger(__name__)

STUDY_KINDS = ("time-weak", "space-weak", "time-strong", "space-strong", "deterministic", "validate-mc")
NOISE_KINDS = ("white", "diagonal_power", "kernel", "zero")
CONTAMINATION_RATIO = 0.05
MIN_R2 = 0.98
CSV_HEADER = ("study", "resolution", "dt", "h", "error", "stderr", "seed")


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    study: str = "time-weak"
    K: int = 64
    noise: str = "white"
    beta0: float = 0.0
    kernel_file: str | None = None
    alpha: float = 0.51  # declared trace index, Tr(A^-alpha) < inf
    beta: float | None = None  # declared regularity of Q; defaults to beta0 (0 for kernels)
    theta: float = 1.0
    T: float = 1.0
    N_list: list[int] = field(default_factory=lambda: [8, 16, 32, 64, 128, 256])
    space: str = "spectral"
    sizes: list[int] = field(default_factory=lambda: [64])
    x: list[float] = field(default_factory=list)  # sine coefficients of the initial datum
    functional: str = "cosine"
    g_mode: int = 1
    phase: float = 0.0
    scale: float = 1.0
    seed: int = 0
    paths: int = 10_000
    jobs: int = 1
    allow_unstable_theta: bool = False
    out: str | None = None
    format: str = "csv"
    slope_min: float | None = None  # --check window; default theory_sup -/+ 0.1
    slope_max: float | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.study not in STUDY_KINDS:
            raise ConfigError(f"study must be one of {STUDY_KINDS}, got {self.study!r}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.noise == "kernel" and not self.kernel_file:
            raise ConfigError("noise = kernel needs kernel_file")
        if self.space not in ("spectral", "p1"):
            raise ConfigError("space must be spectral or p1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.functional not in ("cosine", "gaussian", "linear", "quadratic"):
            raise ConfigError(f"unknown functional {self.functional!r}")
        if self.K < 1 or self.paths < 2 or self.jobs < 1 or self.T <= 0:
            raise ConfigError("K >= 1, paths >= 2, jobs >= 1 and T > 0 are required")
        if not self.N_list or not self.sizes:
            raise ConfigError("N_list and sizes must be nonempty")
        if any(n < 1 for n in self.N_list) or any(s < 1 for s in self.sizes):
            raise ConfigError("grid entries must be positive")
        if self.space == "spectral" and max(self.sizes) > self.K:
            raise ConfigError("spectral space size m cannot exceed K")
        if not 1 <= self.g_mode <= self.K:
            raise ConfigError("g_mode must lie in 1..K")
        if len(self.x) > self.K:
            raise ConfigError("initial datum has more modes than K")
        try:
            ThetaScheme(self.theta, self.T, 1, self.allow_unstable_theta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    @property
    def declared_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return self.beta0 if self.noise == "diagonal_power" else 0.0

    def resolutions(self) -> list[int]:
        if self.study in ("space-weak", "space-strong"):
            return sorted(self.sizes)
        return sorted(self.N_list)


# key = value config files -------------------------------------------------

_LIST_KEYS = {"N_list": int, "sizes": int, "x": float}
_ALIASES = {"N": "N_list", "M_list": "sizes", "m_list": "sizes", "M": "sizes", "m": "sizes"}


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(StudyConfig)}
    if name in _LIST_KEYS:
        parts = [p for p in raw.replace(",", " ").split() if p]
        if _LIST_KEYS[name] is int:
            return [int(float(p)) for p in parts]
        return [float(p) for p in parts]
    kind = kinds[name]
    if "bool" in kind:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if "int" in kind:
        return int(raw, 0)
    if "float" in kind:
        if raw.strip().lower() == "none":
            return None
        return float(raw)
    if "None" in kind and raw.strip().lower() == "none":
        return None
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(StudyConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path, **overrides) -> StudyConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return StudyConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# fits ----------------------------------------------------------------------

def fit_rate(points) -> tuple[float | None, float | None, float | None]:
    """Least squares of log2(error) on log2(step) for (step, error) pairs.

    Nonpositive errors are excluded; with fewer than two usable points the
    result is (None, None, None).
    """
    return tuple(_fit(points)[:3])


def _fit(points) -> tuple:
    points = list(points)
    pts = [(float(r), float(e)) for r, e in points if e > 0 and r > 0 and math.isfinite(e)]
    dropped = len(points) - len(pts)
    note = f"{dropped} nonpositive error(s) excluded" if dropped else ""
    if len(pts) < 2:
        return None, None, None, len(pts), (note + "; " if note else "") + "fewer than 2 usable points, no slope"
    x = np.log2([p[0] for p in pts])
    y = np.log2([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2, len(pts), note


@dataclass
class ConvergenceReport:
    study: str
    points: list  # (resolution, dt, h, error, stderr)
    slope: float | None
    intercept: float | None
    r2: float | None
    theory_sup: float | None
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    contamination: float | None = None
    dropped_coarsest: bool = False
    mc_pass: bool | None = None
    seed: int = 0

    @property
    def errors(self) -> np.ndarray:
        return np.array([p[3] for p in self.points])


# studies -------------------------------------------------------------------

def build_noise(config: StudyConfig, model) -> cov.CovarianceModel:
    if config.noise == "white":
        return cov.white(model)
    if config.noise == "zero":
        return cov.zero(model)
    if config.noise == "diagonal_power":
        return cov.diagonal_power(model, config.beta0)
    return cov.from_kernel(model, cov.load_kernel_coefficients(config.kernel_file))


def build_functional(config: StudyConfig) -> Functional:
    if config.functional == "gaussian":
        return Functional.gaussian(config.scale)
    g = np.zeros(config.g_mode)
    g[-1] = 1.0
    if config.functional == "cosine":
        return Functional.cosine(g, config.phase)
    return Functional(config.functional, g)


def _theory_sup(study: str, gamma_sup: float) -> float | None:
    return {
        "time-weak": gamma_sup,
        "space-weak": 2 * gamma_sup,
        "time-strong": gamma_sup / 2,
        "space-strong": gamma_sup,
        "deterministic": 1.0,
    }.get(study)


def _pmap(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Evaluate the configured study and fit its empirical order.

    The complementary resolution is pinned at its finest grid entry. For weak
    studies the pinned error is compared with the coarsest error of the study
    and a warning is recorded when it exceeds 5 %.
    """
    config.validate()
    model = build_dirichlet_laplacian_1d(config.K)
    idx = cov.admissible_gamma(config.alpha, config.declared_beta, model)
    res = config.resolutions()
    if len(res) < 2:
        raise ConfigError("a study needs at least 2 resolutions")
    Q = build_noise(config, model)
    phi = build_functional(config)
    x = np.asarray(config.x, dtype=float)
    kind = config.study
    time_study = kind in ("time-weak", "time-strong", "deterministic", "validate-mc")
    if kind == "deterministic":
        Q = cov.zero(model)
        if not np.any(x):
            x = np.array([1.0])

    def scheme(N):
        return ThetaScheme(config.theta, config.T, N, config.allow_unstable_theta)

    if time_study:
        space = build_space(config.space, max(config.sizes), model)
        spaces = {r: space for r in res}
        schemes = {r: scheme(r) for r in res}
    else:
        N = max(config.N_list)
        spaces = {r: build_space(config.space, r, model) for r in res}
        schemes = {r: scheme(N) for r in res}

    def point(r):
        sp, sc = spaces[r], schemes[r]
        stderr = 0.0
        if kind in ("time-weak", "space-weak"):
            err = weak_error(model, sp, Q, sc, x, phi)
        elif kind in ("time-strong", "space-strong"):
            err = math.sqrt(strong_error_sq(model, sp, Q, sc, x))
        elif kind == "deterministic":
            F = sc.amplification(sp.eigenvalues)
            err = float(np.max(np.abs(np.exp(-sp.eigenvalues * sc.T) - F**sc.N)))
        else:
            sampler = SchemeSampler(sp, Q, sc, x, NoiseStream(config.seed))
            est, stderr = mc_expect(sampler, phi, config.paths)
            err = abs(est - expect_functional(discrete_law(sp, Q, sc, x), phi))
        return (r, sc.dt, sp.h, float(err), float(stderr))

    points = _pmap(point, res, config.jobs)
    report = ConvergenceReport(kind, points, None, None, None, _theory_sup(kind, idx.gamma_sup), seed=config.seed)

    if kind in ("time-weak", "space-weak"):
        _contamination(report, config, model, Q, x, phi, spaces, schemes, time_study)

    if kind == "validate-mc":
        ok = all(p[3] <= 4 * p[4] for p in points)
        report.mc_pass = ok
        if not ok:
            report.warnings.append("MC estimate outside 4 standard errors of the exact law")
        report.notes.append("validate-mc: error = |MC estimate - exact discrete expectation|")
        return report

    _attach_fit(report, time_study)
    return report


def _contamination(report, config, model, Q, x, phi, spaces, schemes, time_study) -> None:
    coarsest = report.points[0][3]
    if time_study:
        sp = spaces[report.points[0][0]]
        exact = expect_functional(continuous_law(model, Q, x, config.T), phi)
        pinned = abs(expect_functional(semidiscrete_law(sp, Q, x, config.T), phi) - exact)
        what = "space error at the pinned space"
    else:
        r = report.points[-1][0]
        sp, sc = spaces[r], schemes[r]
        pinned = abs(
            expect_functional(discrete_law(sp, Q, sc, x), phi)
            - expect_functional(semidiscrete_law(sp, Q, x, config.T), phi)
        )
        what = "time error at the pinned N on the finest space"
    ratio = pinned / coarsest if coarsest > 0 else math.inf
    report.contamination = ratio
    if ratio > CONTAMINATION_RATIO:
        msg = f"{what} is {100 * ratio:.1f}% of the coarsest error (threshold 5%)"
        report.warnings.append(msg)
        log.info(msg)


def _attach_fit(report: ConvergenceReport, time_study: bool) -> None:
    col = 1 if time_study else 2
    pts = [(p[col], p[3]) for p in report.points]
    if len(pts) < 3:
        report.notes.append("fewer than 3 points: slope not reported")
        _, _, report.r2, _, note = _fit(pts)
        if note:
            report.notes.append(note)
        return
    slope, icpt, r2, used, note = _fit(pts)
    if note:
        report.notes.append(note)
    if r2 is not None and r2 < MIN_R2 and used >= 4:
        # coarsest point is the one with the largest step
        coarse = max(p[0] for p in pts)
        slope2, icpt2, r22, _, _ = _fit([p for p in pts if p[0] != coarse])
        report.notes.append(f"R^2={r2:.4f} < {MIN_R2}: coarsest point dropped from the fit")
        report.dropped_coarsest = True
        slope, icpt, r2 = slope2, icpt2, r22
    report.slope, report.intercept, report.r2 = slope, icpt, r2


def check_report(report: ConvergenceReport, config: StudyConfig) -> list[str]:
    """Failures of the acceptance assertions used by ``--check``; empty means pass."""
    fails = []
    if report.study == "validate-mc":
        if not report.mc_pass:
            fails.append("MC estimate outside 4 standard errors")
        return fails
    if report.slope is None:
        return ["no slope was fitted"]
    sup = report.theory_sup
    lo = config.slope_min if config.slope_min is not None else sup - 0.1
    hi = config.slope_max if config.slope_max is not None else sup + 0.1
    if not lo <= report.slope <= hi:
        fails.append(f"slope {report.slope:.4f} outside [{lo:.4f}, {hi:.4f}]")
    return fails


# output --------------------------------------------------------------------

def _g(v) -> str:
    return "%.17g" % v


def report_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r, dt, h, err, se in report.points:
        w.writerow([report.study, str(r), _g(dt), _g(h), _g(err), _g(se), str(report.seed)])
    return buf.getvalue()


def report_json(report: ConvergenceReport, config: StudyConfig) -> str:
    doc = {
        "config": asdict(config),
        "study": report.study,
        "columns": list(CSV_HEADER),
        "points": [
            {"resolution": r, "dt": dt, "h": h, "error": e, "stderr": s}
            for r, dt, h, e, s in report.points
        ],
        "slope": report.slope,
        "intercept": report.intercept,
        "r2": report.r2,
        "theory_sup": report.theory_sup,
        "contamination": report.contamination,
        "dropped_coarsest": report.dropped_coarsest,
        "mc_pass": report.mc_pass,
        "warnings": report.warnings,
        "notes": report.notes,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def gnuplot_script(csv_path: str, study: str) -> str:
    col, xlabel = (4, "h") if study in ("space-weak", "space-strong") else (3, "dt")
    return "\n".join([
        "set datafile separator ','",
        "set logscale xy",
        f"set xlabel '{xlabel}'",
        "set ylabel 'error'",
        "set key top left",
        f"plot '{csv_path}' every ::1 using {col}:5 with linespoints title '{study}'",
        "",
    ])
