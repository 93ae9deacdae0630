"""Monte-Carlo experiment harness.

Four experiments are provided:

``fig2``
    Separation radius and condition number of Gaussian kernel matrices of
    uniform samples on [0,1]^d as the dimension grows.
``sim1``
    Interpolation of a sum-of-Gaussian-bumps target in moderate dimension.
    Records the spectrum-based error functional (AE) and the test RMSE as
    m grows.
``sim2``
    The same quantities in high dimension.
``sim3``
    Ridge-regularized fits on a lambda grid, with the kernel width chosen
    per trial by hold-out.  Runs with noise-free and with noisy responses.

Per-trial seeds come from ``derive_seed(master_seed, experiment, d, m,
trial)``.  Each random stream inside a trial (points, coefficients, test
points, noise, split, probes) uses its own child seed.  Trials run on a
thread pool and are reassembled in a fixed order, so output does not depend
on the number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np

from .bounds import BoundConfig, ae_noise_free, ae_noisy
from .errors import KslError, ValidationError
from .interpolation import LabeledSet, fit, holdout_select, rmse
from .kernels import Kernel, gaussian_from_gamma, gram, kernel_from_config
from .linalg import eigen_sym
from .operator_diag import estimate_all
from .rng import derive_seed, generator
from .sampling import SampleSet, fill_distance_estimate, sample_uniform, separation_radius
from .spectrum import DEFAULT_LAMBDA_GRID, spectral_profile

__all__ = [
    "EXPERIMENTS",
    "SIM3_LAMBDAS",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentResult",
    "target_function",
    "default_config",
    "config_from_dict",
    "run_fig2",
    "run_sim1",
    "run_sim2",
    "run_sim3",
    "run_experiment",
    "records_to_csv",
    "write_outputs",
    "resolve_threads",
]

EXPERIMENTS = ("fig2", "sim1", "sim2", "sim3")
SIM3_LAMBDAS = (0.0, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.28, 2.56)
SIM3_GAMMAS = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
VARIANTS = ("noise_free", "noisy")
MAX_POOLED = 5000


def target_function(c) -> Callable[[np.ndarray], np.ndarray]:
    """``f*(x) = sum_j c_j exp(-x_j^2)``, vectorized over rows of ``x``.

    Examples
    --------
    >>> f = target_function([1.0, -1.0])
    >>> float(f([1.0, 1.0]))
    0.0
    """
    c = np.asarray(c, dtype=float).ravel()
    if not np.all(np.isfinite(c)):
        raise ValidationError("target coefficients must be finite")

    def f(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[1] != c.size:
            raise ValidationError(f"target has d={c.size}, points have d={X.shape[1]}")
        out = np.exp(-X * X) @ c
        return out[0] if single else out

    f.coefficients = c
    return f


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one experiment run.

    ``kernel`` is a kernel config dict.  If ``gamma`` is set, it overrides
    ``kernel`` with a Gaussian in the ``gamma_convention``
    parameterization.  For sim3, ``gamma_grid`` is the hold-out grid and
    ``lambda_grid`` the ridge grid.  ``bound_grid`` is the minimization grid
    of the error functional.
    """

    experiment: str
    dims: tuple
    ms: tuple
    trials: int
    kernel: dict = field(default_factory=lambda: {"family": "gaussian", "a": 0.025})
    gamma: Optional[float] = None
    gamma_convention: str = "half"
    gamma_grid: tuple = SIM3_GAMMAS
    lambda_grid: tuple = SIM3_LAMBDAS
    bound_grid: tuple = DEFAULT_LAMBDA_GRID
    noise_level: float = 0.2
    test_size: int = 500
    r_smooth: float = 0.5
    box: tuple = (-1.0, 1.0)
    master_seed: int = 0
    output_path: Optional[str] = None
    probe_factor: int = 10
    variants: tuple = VARIANTS
    ridge_scaling: str = "unscaled"
    operator_estimates: bool = False
    operator_lambda: float = 0.1
    ref_factor: int = 10

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for name in ("dims", "ms", "gamma_grid", "lambda_grid", "bound_grid", "box", "variants"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.dims or any(int(d) != d or d < 1 for d in self.dims):
            raise ValidationError(f"dims must be positive integers, got {self.dims}")
        if not self.ms or any(int(m) != m or m < 2 for m in self.ms):
            raise ValidationError(f"ms must be integers >= 2, got {self.ms}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.test_size < 1 or self.probe_factor < 1 or self.ref_factor < 1:
            raise ValidationError("test_size, probe_factor and ref_factor must be >= 1")
        if self.noise_level < 0:
            raise ValidationError(f"noise_level must be >= 0, got {self.noise_level}")
        if any(v not in VARIANTS for v in self.variants) or not self.variants:
            raise ValidationError(f"variants must be drawn from {VARIANTS}")
        if any(lam < 0 for lam in self.lambda_grid) or not self.lambda_grid:
            raise ValidationError("lambda_grid must be non-empty and nonnegative")
        if not self.gamma_grid or any(g <= 0 for g in self.gamma_grid):
            raise ValidationError("gamma_grid must be non-empty and positive")
        self.base_kernel()

    def base_kernel(self) -> Kernel:
        if self.gamma is not None:
            return gaussian_from_gamma(self.gamma, self.gamma_convention, self.dims[0])
        return kernel_from_config(self.kernel)

    def kernel_for(self, d: int) -> Kernel:
        if self.gamma is not None:
            return gaussian_from_gamma(self.gamma, self.gamma_convention, d)
        k = kernel_from_config({k: v for k, v in self.kernel.items() if k != "d"})
        return k if k.family == "gaussian" else k.bind(d)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    def config_hash(self) -> str:
        blob = json.dumps({k: v for k, v in self.to_dict().items() if k != "output_path"},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_DEFAULTS = {
    "fig2": dict(dims=tuple(range(2, 101)), ms=(500,), trials=10, kernel={"family": "gaussian", "a": 0.5},
                 box=(0.0, 1.0)),
    "sim1": dict(dims=(8, 32, 128), ms=tuple(range(500, 1501, 100)), trials=20, gamma=0.05),
    "sim2": dict(dims=tuple(range(50, 501, 50)), ms=(300, 600, 900), trials=20, gamma=0.05),
    "sim3": dict(dims=(200,), ms=tuple(range(500, 1501, 200)), trials=20, gamma=None,
                 kernel={"family": "gaussian", "a": 0.025}),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Default configuration of an experiment, with keyword overrides."""
    if experiment not in _DEFAULTS:
        raise ValidationError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    base = dict(_DEFAULTS[experiment])
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, **base)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Merge a JSON config over the defaults of its experiment."""
    if not isinstance(data, dict) or "experiment" not in data:
        raise ValidationError("experiment config must be an object with an 'experiment' key")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys {sorted(unknown)}")
    rest = {k: v for k, v in data.items() if k != "experiment"}
    return default_config(data["experiment"], **rest)


@dataclass
class TrialRecord:
    """One output row.  Field order is the CSV column order.

    Per-trial rows leave unused fields as None.  Summary rows have
    ``trial = -1`` and hold means, with twice the standard deviation in the
    ``*_2std`` fields.  ``note`` explains any NaN.
    """

    experiment: str
    variant: str
    d: int
    m: int
    trial: int
    seed: Optional[int] = None
    q_sep: Optional[float] = None
    h_fill: Optional[float] = None
    cond: Optional[float] = None
    min_eig: Optional[float] = None
    AE: Optional[float] = None
    RMSE_test: Optional[float] = None
    lam: Optional[float] = None
    gamma_star: Optional[float] = None
    train_residual: Optional[float] = None
    q_sep_2std: Optional[float] = None
    cond_2std: Optional[float] = None
    r_hat: Optional[float] = None
    q_hat: Optional[float] = None
    p_hat: Optional[float] = None
    w_hat: Optional[float] = None
    u_hat: Optional[float] = None
    note: str = ""
    runtime_ms: Optional[float] = None


OPERATOR_COLUMNS = ("r_hat", "q_hat", "p_hat", "w_hat", "u_hat")
COLUMN_NAMES = {"lam": "lambda"}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    spectra: dict = field(default_factory=dict)

    def columns(self) -> list:
        names = [f.name for f in fields(TrialRecord)]
        if not self.config.operator_estimates:
            names = [n for n in names if n not in OPERATOR_COLUMNS]
        return names


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count from the argument, else ``KSL_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("KSL_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(f"KSL_THREADS must be an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    return int(threads)


def _parallel_map(func, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks))


def _trial_seed(cfg: ExperimentConfig, d: int, m: int, t: int) -> int:
    return derive_seed(cfg.master_seed, cfg.experiment, d, m, t)


def _spectrum(K: np.ndarray) -> np.ndarray:
    return eigen_sym(K).eigenvalues


def _fig2_trial(cfg: ExperimentConfig, d: int, m: int, t: int):
    t0 = time.perf_counter()
    seed = _trial_seed(cfg, d, m, t)
    S = sample_uniform(m, d, cfg.box, derive_seed(seed, "points"))
    kernel = cfg.kernel_for(d)
    w = _spectrum(gram(kernel, S.points))
    prof = spectral_profile(w, cfg.bound_grid)
    rec = TrialRecord(cfg.experiment, "", d, m, t, seed,
                      q_sep=separation_radius(S),
                      h_fill=fill_distance_estimate(S, cfg.probe_factor * m, derive_seed(seed, "probes")),
                      cond=prof.cond, min_eig=prof.min_eig)
    rec.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return [rec], {(d, m, t, ""): w}


def _mean_2std(vals):
    a = np.asarray([v for v in vals if v is not None and math.isfinite(v)], dtype=float)
    if a.size == 0:
        return float("nan"), float("nan")
    return float(a.mean()), float(2.0 * a.std(ddof=1)) if a.size > 1 else 0.0


def _with_pool(cfg: ExperimentConfig, worker, threads: int, variant_loop: bool = False) -> ExperimentResult:
    tasks = [(d, m, t) for d in cfg.dims for m in cfg.ms for t in range(cfg.trials)]
    outs = _parallel_map(lambda task: worker(cfg, *task), tasks, threads)
    records, spectra = [], {}
    for recs, spec in outs:
        records.extend(recs)
        spectra.update(spec)
    return ExperimentResult(cfg, records, spectra)


def run_fig2(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Separation radius and conditioning versus dimension.

    Adds one summary row per ``(d, m)`` after its trials.
    """
    _expect(cfg, "fig2")
    res = _with_pool(cfg, _fig2_trial, resolve_threads(threads))
    out = []
    for d in cfg.dims:
        for m in cfg.ms:
            rows = [r for r in res.records if r.d == d and r.m == m]
            out.extend(rows)
            qm, q2 = _mean_2std([r.q_sep for r in rows])
            cm, c2 = _mean_2std([r.cond for r in rows])
            hm, _ = _mean_2std([r.h_fill for r in rows])
            em, _ = _mean_2std([r.min_eig for r in rows])
            out.append(TrialRecord(cfg.experiment, "", d, m, -1, None, q_sep=qm, h_fill=hm, cond=cm,
                                   min_eig=em, q_sep_2std=q2, cond_2std=c2, note="summary"))
    res.records = out
    return res


def _expect(cfg: ExperimentConfig, name: str) -> None:
    if cfg.experiment != name:
        raise ValidationError(f"config is for {cfg.experiment!r}, expected {name!r}")


def _draw_problem(cfg: ExperimentConfig, seed: int, d: int, m: int):
    S = sample_uniform(m, d, cfg.box, derive_seed(seed, "points"))
    c = generator(derive_seed(seed, "coef")).uniform(-1.0, 1.0, d)
    f = target_function(c)
    test = sample_uniform(cfg.test_size, d, cfg.box, derive_seed(seed, "test"))
    return S, f, LabeledSet(test, f(test.points))


def _operator_columns(cfg: ExperimentConfig, rec: TrialRecord, seed: int, S: SampleSet, f, y, kernel: Kernel):
    m = S.m
    mr = min(cfg.ref_factor * m, MAX_POOLED - m)
    if mr < 1:
        rec.note = (rec.note + ";" if rec.note else "") + "operator estimates skipped: sample too large"
        return
    ref = sample_uniform(mr, S.d, cfg.box, derive_seed(seed, "reference"))
    est = estimate_all(S, ref, kernel, cfg.operator_lambda, f, y)
    rec.r_hat, rec.q_hat, rec.p_hat, rec.w_hat, rec.u_hat = est.r_hat, est.q_hat, est.p_hat, est.w_hat, est.u_hat


def _interp_trial(cfg: ExperimentConfig, d: int, m: int, t: int):
    t0 = time.perf_counter()
    seed = _trial_seed(cfg, d, m, t)
    S, f, test = _draw_problem(cfg, seed, d, m)
    kernel = cfg.kernel_for(d)
    rec = TrialRecord(cfg.experiment, "noise_free", d, m, t, seed)
    spectra = {}
    try:
        rec.q_sep = separation_radius(S)
        rec.h_fill = fill_distance_estimate(S, cfg.probe_factor * m, derive_seed(seed, "probes"))
        K = gram(kernel, S.points)
        w = _spectrum(K)
        spectra[(d, m, t, "noise_free")] = w
        prof = spectral_profile(w, cfg.bound_grid)
        rec.cond, rec.min_eig = prof.cond, prof.min_eig
        bcfg = BoundConfig(r_smooth=cfg.r_smooth, lambda_grid=cfg.bound_grid, mu_grid=cfg.bound_grid,
                           kappa=kernel.kappa)
        rec.AE = ae_noise_free(prof, bcfg).value
        data = LabeledSet(S, f(S.points))
        model = fit(data, kernel, 0.0, cfg.ridge_scaling, gram_matrix=K)
        rec.train_residual = model.train_residual
        if model.truncation_flag:
            rec.note = "regularized-by-truncation"
        rec.RMSE_test = rmse(model, test)
        if cfg.operator_estimates:
            _operator_columns(cfg, rec, seed, S, f, data.y, kernel)
    except KslError as exc:
        rec.note = f"failed: {exc}".replace("\n", " ")
    rec.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return [rec], spectra


def run_sim1(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Interpolation error versus sample size (moderate dimension)."""
    _expect(cfg, "sim1")
    return _with_pool(cfg, _interp_trial, resolve_threads(threads))


def run_sim2(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Interpolation error and conditioning versus dimension (high dimension)."""
    _expect(cfg, "sim2")
    return _with_pool(cfg, _interp_trial, resolve_threads(threads))


def _sim3_trial(cfg: ExperimentConfig, d: int, m: int, t: int):
    seed = _trial_seed(cfg, d, m, t)
    S, f, test = _draw_problem(cfg, seed, d, m)
    clean = f(S.points)
    noise = generator(derive_seed(seed, "noise")).uniform(-cfg.noise_level, cfg.noise_level, m)
    records, spectra = [], {}
    for variant in cfg.variants:
        t0 = time.perf_counter()
        y = clean if variant == "noise_free" else clean + noise
        data = LabeledSet(S, y)
        base = dict(experiment=cfg.experiment, variant=variant, d=d, m=m, trial=t, seed=seed)
        try:
            sel = holdout_select(data, cfg.gamma_convention, cfg.gamma_grid, 0.0,
                                 derive_seed(seed, "holdout"), cfg.ridge_scaling)
            kernel = gaussian_from_gamma(sel.gamma_star, cfg.gamma_convention, d)
            K = gram(kernel, S.points)
            w = _spectrum(K)
            spectra[(d, m, t, variant)] = w
            prof = spectral_profile(w, cfg.bound_grid)
            bcfg = BoundConfig(r_smooth=cfg.r_smooth, lambda_grid=cfg.bound_grid, mu_grid=cfg.bound_grid)
            if variant == "noise_free":
                ae = ae_noise_free(prof, bcfg).value
            else:
                ae = ae_noisy(prof, bcfg, cfg.noise_level).value if prof.min_eig > 0 else float("nan")
            q = separation_radius(S)
        except KslError as exc:
            rec = TrialRecord(**base, note=f"failed: {exc}".replace("\n", " "))
            rec.runtime_ms = 1000.0 * (time.perf_counter() - t0)
            records.append(rec)
            continue
        elapsed = time.perf_counter() - t0
        for lam in cfg.lambda_grid:
            t1 = time.perf_counter()
            rec = TrialRecord(**base, q_sep=q, cond=prof.cond, min_eig=prof.min_eig, AE=ae, lam=float(lam),
                              gamma_star=sel.gamma_star)
            if not math.isfinite(ae):
                rec.note = "AE undefined: non-positive smallest eigenvalue"
            try:
                model = fit(data, kernel, float(lam), cfg.ridge_scaling, gram_matrix=K)
                rec.train_residual = model.train_residual
                rec.RMSE_test = rmse(model, test)
                if model.truncation_flag:
                    rec.note = "regularized-by-truncation"
            except KslError as exc:
                rec.note = f"failed: {exc}".replace("\n", " ")
            rec.runtime_ms = 1000.0 * (time.perf_counter() - t1 + elapsed / len(cfg.lambda_grid))
            records.append(rec)
    return records, spectra


def run_sim3(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Test error on a ridge grid with hold-out selected kernel width."""
    _expect(cfg, "sim3")
    res = _with_pool(cfg, _sim3_trial, resolve_threads(threads))
    order = {v: i for i, v in enumerate(cfg.variants)}
    res.records.sort(key=lambda r: (r.d, r.m, r.trial, order.get(r.variant, 0), r.lam if r.lam is not None else -1))
    return res


RUNNERS = {"fig2": run_fig2, "sim1": run_sim1, "sim2": run_sim2, "sim3": run_sim3}


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg, threads)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def records_to_csv(result: ExperimentResult, include_runtime: bool = True) -> str:
    """CSV text with one row per record; floats use shortest round-trip form."""
    cols = result.columns()
    if not include_runtime:
        cols = [c for c in cols if c != "runtime_ms"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([COLUMN_NAMES.get(c, c) for c in cols])
    for rec in result.records:
        w.writerow([_cell(getattr(rec, c)) for c in cols])
    return buf.getvalue()


def manifest(result: ExperimentResult) -> dict:
    import scipy

    from . import __version__
    return {
        "experiment": result.config.experiment,
        "config_hash": result.config.config_hash(),
        "master_seed": result.config.master_seed,
        "config": result.config.to_dict(),
        "rows": len(result.records),
        "versions": {"ksl": __version__, "python": sys.version.split()[0], "numpy": np.__version__,
                     "scipy": scipy.__version__, "platform": platform.platform()},
    }


def write_outputs(result: ExperimentResult, path: str) -> tuple[str, str]:
    """Write the CSV to ``path`` and the manifest next to it."""
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(result))
    mpath = os.path.splitext(path)[0] + ".manifest.json"
    with open(mpath, "w") as fh:
        json.dump(manifest(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, mpath


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw)
