"""Command-line front end.

Exit codes: 0 success, 1 invalid input (one ``prefix: message`` line on
stderr), 2 numerical failure (message with smallest eigenvalue and
condition number when known).

Every subcommand except ``experiment`` accepts ``--config FILE``, a JSON
object of flag values (keys are flag names without dashes, ``-`` or ``_``
separated).  Explicit flags override it.  ``experiment --config`` instead
takes an experiment config; flags override its fields.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from .bounds import BoundConfig, ae_noise_free, ae_noisy, ae_trans_native
from .errors import KslError, NumericalError, ParseError, ValidationError
from .experiments import (EXPERIMENTS, config_from_dict, default_config, resolve_threads, run_experiment,
                          target_function, write_outputs)
from .interpolation import KernelModel, LabeledSet, fit, predict
from .kernels import Kernel, gram
from .linalg import eigen_sym
from .operator_diag import PooledOperators, estimate_p_w_u, estimate_r
from .sampling import SampleSet, bounding_box, geometry_summary, read_points_csv, separation_prob_bound
from .spectrum import DEFAULT_LAMBDA_GRID, SpectralProfile, spectral_profile

__all__ = ["main", "build_parser", "ingest_csv"]

log = logging.getLogger("ksl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def ingest_csv(path: str, labeled: Optional[bool] = None):
    """Read ``x1..xd[,y]`` CSV into a :class:`SampleSet` or :class:`LabeledSet`.

    ``labeled=True`` requires a ``y`` column, ``False`` forbids one, ``None``
    accepts both.  The box is the bounding box of the points.
    """
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    X, y = read_points_csv(text, allow_y=labeled is not False)
    if labeled and y is None:
        raise ParseError(f"{path}: a y column is required")
    S = SampleSet(X, bounding_box(X))
    return S if y is None else LabeledSet(S, y)


def duplicate_rows(X: np.ndarray) -> Optional[tuple[int, int]]:
    """1-based row numbers of the first pair of identical points, if any."""
    _, first, inv = np.unique(X, axis=0, return_index=True, return_inverse=True)
    inv = np.asarray(inv).ravel()
    for i, g in enumerate(inv):
        if first[g] != i:
            return int(first[g]) + 1, i + 1
    return None


def _parse_grid(text: str) -> tuple:
    if text == "default":
        return DEFAULT_LAMBDA_GRID
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"grid must be 'default' or comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ValidationError("empty grid")
    return vals


def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def _kernel(args, d: int) -> Kernel:
    if args.kernel == "gaussian":
        if args.a is None:
            raise ValidationError("--a is required for the gaussian kernel")
        return Kernel.gaussian(args.a)
    if args.tau is None:
        raise ValidationError("--tau is required for the sobolev kernel")
    return Kernel.sobolev(args.tau, d)


def _emit(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _add_kernel(p) -> None:
    p.add_argument("--kernel", choices=("gaussian", "sobolev"), default="gaussian",
                   help="kernel family (default gaussian)")
    p.add_argument("--a", type=float, help="Gaussian parameter in exp(-a |x-y|^2)")
    p.add_argument("--tau", type=float, help="Sobolev smoothness, needs 0 < tau - d/2 <= 50")


def _add_common(p, out_help: str = "output path (default stdout)") -> None:
    p.add_argument("--config", help="JSON file of flag values")
    p.add_argument("--out", help=out_help)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _cmd_spectrum(args) -> int:
    S = ingest_csv(args.data)
    pts = S.points
    kernel = _kernel(args, pts.shape[1])
    w = eigen_sym(gram(kernel, pts), args.method).eigenvalues
    _emit(spectral_profile(w, _parse_grid(args.lambda_grid)).to_dict(), args.out)
    return 0


def _cmd_fit(args) -> int:
    data = ingest_csv(args.data, labeled=True)
    dup = duplicate_rows(data.points)
    if dup is not None:
        msg = f"duplicate points at rows {dup[0]} and {dup[1]}"
        if args.lam == 0:
            raise ValidationError(msg + "; interpolation (lambda=0) needs distinct points")
        _warn(msg)
    kernel = _kernel(args, data.samples.d)
    model = fit(data, kernel, args.lam, args.ridge_scaling, allow_truncation=not args.strict)
    if model.truncation_flag:
        _warn("near-singular system regularized by truncation")
    _emit(model.to_dict(), args.out)
    return 0


def _cmd_predict(args) -> int:
    model = KernelModel.from_dict(_load_json(args.model))
    S = ingest_csv(args.points)
    pred = predict(model, S.points)
    text = (S if isinstance(S, SampleSet) else S.samples).to_csv(pred)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bounds(args) -> int:
    if (args.profile is None) == (args.data is None):
        raise ValidationError("give exactly one of --profile or --data")
    grid = _parse_grid(args.lambda_grid)
    if args.profile:
        raw = _load_json(args.profile)
        try:
            prof = SpectralProfile.from_dict(raw)
        except KeyError as exc:
            raise ParseError(f"{args.profile}: missing key {exc}") from None
        kappa = args.kappa
    else:
        S = ingest_csv(args.data)
        kernel = _kernel(args, S.points.shape[1])
        prof = spectral_profile(eigen_sym(gram(kernel, S.points)).eigenvalues, grid)
        kappa = args.kappa if args.kappa is not None else kernel.kappa
    cfg = BoundConfig(r_smooth=args.r_smooth, delta=args.delta, h_norm=args.h_norm, lambda_grid=grid,
                      mu_grid=grid, include_constants=args.include_constants,
                      kappa=kappa if kappa is not None else 1.0, f_inf=args.f_inf,
                      parenthesization=args.parenthesization)
    if cfg.r_smooth < 0.5:
        rep = ae_trans_native(prof, cfg)
    elif args.noise_level > 0:
        rep = ae_noisy(prof, cfg, args.noise_level)
    else:
        rep = ae_noise_free(prof, cfg)
    out = rep.to_dict()
    if not args.verbose_terms:
        out.pop("terms")
    _emit(out, args.out)
    return 0


def _cmd_separation(args) -> int:
    S = ingest_csv(args.data)
    S = S if isinstance(S, SampleSet) else S.samples
    if args.box is not None:
        vals = _parse_grid(args.box)
        if len(vals) != 2:
            raise ValidationError(f"--box must be 'lo,hi', got {args.box!r}")
        S = SampleSet(S.points, vals)
    out = geometry_summary(S, args.probes, args.seed).to_dict()
    if args.t is not None:
        b = separation_prob_bound(S.m, S.d, S.volume, args.t)
        out["probability_bound"] = {"t": args.t, "value": b.value, "vacuous": b.vacuous}
    _emit(out, args.out)
    return 0


def _cmd_operator_diag(args) -> int:
    D = ingest_csv(args.data)
    R = ingest_csv(args.ref)
    X = D.points
    Rp = R.points
    kernel = _kernel(args, X.shape[1])
    out = {"lambda": args.lam, "m": int(X.shape[0]), "reference_size": int(Rp.shape[0]),
           "r_hat": estimate_r(X, Rp, kernel)}
    ops = PooledOperators(X, Rp, kernel)
    out["q_hat"] = ops.q(args.lam)
    out["w_hat"] = ops.w(args.lam)
    if args.coef is not None:
        f = target_function(_parse_grid(args.coef))
        y = D.y if isinstance(D, LabeledSet) else f(X)
        pwu = estimate_p_w_u(X, Rp, kernel, args.lam, f, y, pooled=ops)
        out["p_hat"], out["u_hat"] = pwu["p_hat"], pwu["u_hat"]
    else:
        out["p_hat"] = out["u_hat"] = None
    _emit(out, args.out)
    return 0


def _cmd_experiment(args) -> int:
    if args.dump_defaults:
        _emit({name: default_config(name).to_dict() for name in EXPERIMENTS}, args.dump_defaults)
        return 0
    if args.config:
        raw = _load_json(args.config)
    elif args.name:
        raw = {"experiment": args.name}
    else:
        raise ValidationError("give --config or --name")
    if args.name and raw.get("experiment") != args.name:
        raise ValidationError(f"--name {args.name} disagrees with config experiment {raw.get('experiment')!r}")
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.dims is not None:
        over["dims"] = _parse_ints(args.dims)
    if args.ms is not None:
        over["ms"] = _parse_ints(args.ms)
    if args.trials is not None:
        over["trials"] = args.trials
    if args.out is not None:
        over["output_path"] = args.out
    if args.operator_estimates:
        over["operator_estimates"] = True
    cfg = config_from_dict({**raw, **over})
    if not cfg.output_path:
        raise ValidationError("no output path: set output_path in the config or pass --out")
    threads = resolve_threads(args.threads)
    log.info("running %s: dims=%s ms=%s trials=%d threads=%d", cfg.experiment, list(cfg.dims), list(cfg.ms),
             cfg.trials, threads)
    result = run_experiment(cfg, threads)
    csv_path, man_path = write_outputs(result, cfg.output_path)
    failed = sum(1 for r in result.records if r.note.startswith("failed"))
    log.info("wrote %d rows to %s (%d failed trials), manifest %s", len(result.records), csv_path, failed,
             man_path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ksl", description="Kernel interpolation, spectra and spectrum-based error bounds.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("spectrum", help="kernel-matrix spectrum and effective dimension")
    s.add_argument("--data", required=True, help="CSV x1..xd[,y]")
    _add_kernel(s)
    s.add_argument("--lambda-grid", default="default",
                   help="'default' (40 log-spaced values in [1e-8, 10]) or comma list")
    s.add_argument("--method", choices=("lapack", "jacobi"), default="lapack")
    _add_common(s)
    s.set_defaults(func=_cmd_spectrum)

    s = sub.add_parser("fit", help="fit an interpolant or ridge model")
    s.add_argument("--data", required=True, help="CSV x1..xd,y")
    _add_kernel(s)
    s.add_argument("--lambda", dest="lam", type=float, default=0.0, help="ridge parameter (default 0)")
    s.add_argument("--ridge-scaling", choices=("unscaled", "times_m"), default="unscaled",
                   help="diagonal shift lam (unscaled) or lam*m")
    s.add_argument("--strict", action="store_true", help="fail instead of truncating a singular system")
    _add_common(s, "model JSON path (default stdout)")
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("predict", help="evaluate a fitted model")
    s.add_argument("--model", required=True, help="model JSON from fit")
    s.add_argument("--points", required=True, help="CSV x1..xd")
    _add_common(s, "CSV path for x1..xd,y (default stdout)")
    s.set_defaults(func=_cmd_predict)

    s = sub.add_parser("bounds", help="spectrum-based error bound")
    s.add_argument("--profile", help="spectrum JSON from the spectrum subcommand")
    s.add_argument("--data", help="CSV; the spectrum is computed from it")
    _add_kernel(s)
    s.add_argument("--lambda-grid", default="default")
    s.add_argument("--r-smooth", type=float, default=0.5, help="target regularity r (default 0.5)")
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--h-norm", type=float, default=1.0)
    s.add_argument("--kappa", type=float, help="sqrt(sup K); default from the kernel, else 1")
    s.add_argument("--f-inf", type=float, default=1.0)
    s.add_argument("--noise-level", type=float, default=0.0, help="noise bound; > 0 selects the noisy bound")
    s.add_argument("--include-constants", action="store_true")
    s.add_argument("--parenthesization", choices=("operator", "literal"), default="operator")
    s.add_argument("--verbose-terms", action="store_true", help="include grid terms in the output")
    _add_common(s)
    s.set_defaults(func=_cmd_bounds)

    s = sub.add_parser("separation", help="separation radius and fill-distance estimate")
    s.add_argument("--data", required=True)
    s.add_argument("--probes", type=int, help="Monte-Carlo probes (default 10 m)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--box", help="'lo,hi', written --box=lo,hi when lo is negative (default: bounding box)")
    s.add_argument("--t", type=float, help="also report the bound on P(q >= t)")
    _add_common(s)
    s.set_defaults(func=_cmd_separation)

    s = sub.add_parser("experiment", help="run a Monte-Carlo experiment")
    s.add_argument("--config", help="experiment config JSON")
    s.add_argument("--name", choices=EXPERIMENTS, help="use the defaults of this experiment")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--dims", help="comma-separated dimensions")
    s.add_argument("--ms", help="comma-separated sample sizes")
    s.add_argument("--trials", type=int)
    s.add_argument("--threads", type=int, help="worker threads (default KSL_THREADS or 1)")
    s.add_argument("--operator-estimates", action="store_true", help="add r_hat..u_hat columns")
    s.add_argument("--out", help="CSV path; a .manifest.json is written next to it")
    s.add_argument("--dump-defaults", metavar="PATH", help="write all experiment defaults as JSON and exit")
    s.set_defaults(func=_cmd_experiment)

    s = sub.add_parser("operator-diag", help="Monte-Carlo operator-difference estimates")
    s.add_argument("--data", required=True, help="sample CSV x1..xd[,y]")
    s.add_argument("--ref", required=True, help="reference sample CSV x1..xd")
    _add_kernel(s)
    s.add_argument("--lambda", dest="lam", type=float, default=0.1)
    s.add_argument("--coef", help="comma list c for f*(x) = sum c_j exp(-x_j^2); enables p_hat, u_hat")
    _add_common(s)
    s.set_defaults(func=_cmd_operator_diag)
    return p


def _config_path(argv: list) -> Optional[str]:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, command: str, path: str) -> None:
    """Install flag values from a JSON object as subcommand defaults."""
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: expected a JSON object of flag values")
    sub = parser._subparsers._group_actions[0].choices[command]
    dests = {a.dest for a in sub._actions}
    values = {}
    for key, val in raw.items():
        dest = key.replace("-", "_")
        dest = "lam" if dest == "lambda" else dest
        if dest not in dests or dest in ("config", "func", "help"):
            raise ValidationError(f"{path}: unknown option {key!r}")
        values[dest] = val
    sub.set_defaults(**values)
    for a in sub._actions:
        if a.dest in values:
            a.required = False


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command = argv[0] if argv else None
        commands = parser._subparsers._group_actions[0].choices
        if command in commands and command != "experiment":
            path = _config_path(argv)
            if path is not None:
                _apply_config(parser, command, path)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s",
                            stream=sys.stderr)
        if args.command is None:
            raise ValidationError("a subcommand is required; see ksl --help")
        return args.func(args)
    except NumericalError as exc:
        print(str(exc).replace("\n", " "), file=sys.stderr)
        return 2
    except (KslError, ValueError) as exc:
        msg = str(exc) if isinstance(exc, KslError) else f"validation: {exc}"
        print(msg.replace("\n", " "), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io: {exc}".replace("\n", " "), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
