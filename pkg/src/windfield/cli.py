"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import EnsembleFamily, ForestFamily, IdwFamily, KrigingFamily, NearestNeighborFamily, kriging_fit
from .config import load_config
from .data_model import centered_origin, format_time, parse_observations, parse_time, serialize_observations, stations_bbox
from .errors import ConfigError, DataError, WindFieldError
from .evaluation import ZeroFamily, aggregate, paired_difference, score_slices
from .fourier_series import FourierFamily, GridSpec, train_fourier_series
from .rff import RffFamily, RffHyperparams, chain_diagnostics, modal_frequency, train
from .spectral import LossParams
from .synthetic import FieldPredictor, field_from_dict, random_locations, random_stream_field, sample_slice, single_mode_field
from .theory import (
    BoundParams,
    SpectralProfile,
    bound_value,
    brute_force_density_argmin,
    optimal_density,
    uniform_density,
)

log = logging.getLogger("windfield")

MODEL_NAMES = ("rff", "fourier", "nn", "idw", "kriging", "forest", "ensemble", "zero", "truth")


# ---------------------------------------------------------------- helpers


def _read_dataset(cfg, path=None):
    path = path or cfg.data
    if path is None:
        raise ConfigError("no data file given (argument or config 'data')")
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    stations, slices = parse_observations(raw, convention=cfg.wind_convention)
    excluded = set(cfg.evaluation.exclude_months)
    if excluded:
        slices = [s for s in slices if s.time.strftime("%Y-%m") not in excluded]
    return stations, slices


def _loss(cfg, lam=None, eta=None):
    return LossParams(
        cfg.loss.lam if lam is None else lam,
        cfg.loss.eta if eta is None else eta,
        cfg.loss.gamma_s,
    )


def _dataset_origin(cfg, slices):
    lo, hi = stations_bbox(slices)
    return tuple(float(v) for v in centered_origin(lo, hi, cfg.domain.tau))


def _family(name, cfg, origin, truth=None, lam=None, eta=None):
    tau = tuple(cfg.domain.tau)
    if name == "rff":
        r = cfg.rff
        return RffFamily(RffHyperparams(r.K, r.B, r.sigma, r.gamma_exp, _loss(cfg, lam, eta), tau, origin, cfg.seed))
    if name == "fourier":
        return FourierFamily(GridSpec(cfg.fourier.M, _loss(cfg, lam, eta), tau, origin))
    if name == "nn":
        return NearestNeighborFamily()
    if name == "idw":
        return IdwFamily(cfg.baseline.idw_p)
    if name == "kriging":
        return KrigingFamily()
    if name == "forest":
        return ForestFamily(cfg.baseline.tree_count, cfg.seed)
    if name == "ensemble":
        b = cfg.baseline
        if "ensemble" in b.ensemble_members:
            raise ConfigError("an ensemble cannot contain itself")
        members = [_family(m, cfg, origin) for m in b.ensemble_members]
        return EnsembleFamily(members, list(b.ensemble_weights))
    if name == "zero":
        return ZeroFamily()
    if name == "truth":
        if truth is None:
            raise ConfigError("model 'truth' needs --truth pointing at a synth sidecar")
        return _TruthFamily(truth)
    raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


class _TruthFamily:
    """Ignores the training data and predicts the generating field."""

    def __init__(self, field):
        self.predictor = FieldPredictor(field)

    def __call__(self, slice_):
        return self.predictor


def _load_truth(path):
    if path is None:
        return None
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read truth sidecar {path}: {exc}") from None
    return field_from_dict(d["field"])


def _score_one(args):
    family, sl, seed, M = args
    return score_slices(family, [sl], seed, M)[0]


def _score_parallel(family, slices, seed, M, jobs):
    """Slice scores; fold streams depend on (seed, time) only, never on the worker."""
    tasks = [(family, sl, seed, M) for sl in slices]
    if jobs <= 1 or len(tasks) <= 1:
        return [_score_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_score_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _sample_slices(slices, count, seed, M):
    usable = [s for s in slices if len(s) >= M]
    if len(usable) < count:
        raise DataError(f"{count} slices requested but only {len(usable)} usable slices (>= {M} stations) available")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5A17]))
    idx = np.sort(rng.choice(len(usable), size=count, replace=False))
    return [usable[i] for i in idx]


def _find_slice(slices, text):
    if text is None:
        if not slices:
            raise DataError("dataset has no slices")
        return slices[0]
    t = parse_time(text)
    for s in slices:
        if s.time == t:
            return s
    raise DataError(f"time {format_time(t)} not in dataset")


def _out(cfg, name):
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, datetime):
        return format_time(o)
    raise TypeError(type(o).__name__)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


# ---------------------------------------------------------------- subcommands


def cmd_ingest(cfg, args):
    stations, slices = _read_dataset(cfg, args.data)
    _out(cfg, "observations.csv").write_text(serialize_observations(slices))
    _write_json(
        _out(cfg, "ingest.json"),
        {
            "config": cfg.to_dict(),
            "stations": len(stations),
            "slices": len(slices),
            "observations": sum(len(s) for s in slices),
            "first_time": format_time(slices[0].time) if slices else None,
            "last_time": format_time(slices[-1].time) if slices else None,
        },
    )
    print(f"{len(stations)} stations, {len(slices)} slices")


def cmd_synth(cfg, args):
    ss = np.random.SeedSequence([cfg.seed, 0x5EED])
    field_rng, loc_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    tau = tuple(cfg.domain.tau)
    origin = (0.0, 0.0)
    if args.kind == "single":
        mode = tuple(args.mode)
        if mode == (0, 0):
            raise ConfigError("single-mode field needs a non-zero mode")
        field = single_mode_field(mode, tau=tau, origin=origin)
    else:
        field = random_stream_field(field_rng, args.modes, args.max_mode, tau, origin)
    locs = random_locations(loc_rng, args.stations, tau, origin)
    t0 = datetime(2018, 1, 1, tzinfo=timezone.utc)
    slices = []
    for i in range(args.times):
        t = t0 + timedelta(hours=i)
        slices.append(sample_slice(field, locs, args.noise, np.random.SeedSequence([cfg.seed, 1, i]), time=t))
    _out(cfg, "synthetic.csv").write_text(serialize_observations(slices))
    _write_json(_out(cfg, "synthetic.json"), {"config": cfg.to_dict(), "noise_sigma": args.noise, "field": field.to_dict()})
    print(f"wrote {args.times} slices x {args.stations} stations")


def cmd_fit_rff(cfg, args):
    _, slices = _read_dataset(cfg, args.data)
    sl = _find_slice(slices, args.time)
    fam = _family("rff", cfg, _dataset_origin(cfg, slices))
    model, hist = train(sl, fam.hp)
    _out(cfg, "rff_history.csv").write_text(hist.to_csv())
    rate, h = chain_diagnostics(hist) if len(hist) else (math.nan, {})
    _write_json(
        _out(cfg, "rff_model.json"),
        {
            "config": cfg.to_dict(),
            "time": format_time(sl.time),
            "model": model.to_dict(),
            "acceptance_rate": rate,
            "modal_frequency": list(modal_frequency(h)) if h else None,
            "clamped": hist.clamped,
        },
    )
    print(f"acceptance rate {rate:.3f}")


def cmd_fit_fourier(cfg, args):
    _, slices = _read_dataset(cfg, args.data)
    sl = _find_slice(slices, args.time)
    spec = GridSpec(cfg.fourier.M, _loss(cfg), tuple(cfg.domain.tau), _dataset_origin(cfg, slices))
    model = train_fourier_series(sl, spec)
    _write_json(_out(cfg, "fourier_model.json"), {"config": cfg.to_dict(), "time": format_time(sl.time), "model": model.to_dict()})
    print(f"{len(model.lattice)} frequencies")


def cmd_fit_baseline(cfg, args):
    _, slices = _read_dataset(cfg, args.data)
    sl = _find_slice(slices, args.time)
    info = {"config": cfg.to_dict(), "time": format_time(sl.time), "model": args.model, "stations": len(sl)}
    model = _family(args.model, cfg, None)(sl)
    if args.model == "kriging":
        vg = kriging_fit(sl).variogram
        info["variogram"] = {"slope": vg.slope, "nugget": vg.nugget}
    elif args.model == "idw":
        info["p"] = cfg.baseline.idw_p
    elif args.model == "forest":
        info["tree_count"] = model.tree_count
    pred = model.predict(sl.points)
    info["training_mse"] = float(np.mean(np.sum((pred - sl.velocities) ** 2, axis=1)))
    _write_json(_out(cfg, f"{args.model}_model.json"), info)
    print(f"{args.model}: training mse {info['training_mse']:.6g}")


def cmd_evaluate(cfg, args):
    _, slices = _read_dataset(cfg, args.data)
    ev = cfg.evaluation
    sample = _sample_slices(slices, ev.samples, cfg.seed, ev.folds)
    origin = _dataset_origin(cfg, slices)
    truth = _load_truth(args.truth)
    models = tuple(args.models.split(",")) if args.models else ev.models
    reports = {}
    scores = {}
    for name in models:
        fam = _family(name, cfg, origin, truth)
        sc = _score_parallel(fam, sample, cfg.seed, ev.folds, cfg.worker_count)
        rep = aggregate(sc, name)
        reports[name], scores[name] = rep, sc
        d = rep.to_dict()
        d["config"] = cfg.to_dict()
        _write_json(_out(cfg, f"report_{name}.json"), d)
        rows = [(format_time(s.time), s.n, _fmt(s.q), _fmt(s.q_zero)) for s in sc]
        _out(cfg, f"per_slice_{name}.csv").write_text(_csv_text(("time", "N", "Q", "Q_zero"), rows))
        print(f"{name}: E_tilde {rep.E_tilde:.4f} Q_tilde {rep.Q_tilde:.4f} +- {rep.ci_half_width:.4f}")
    if len(models) > 1:
        ref = models[0]
        rows = []
        for name in models[1:]:
            dr = paired_difference(scores[name], scores[ref])
            rows.append((name, ref, _fmt(dr.delta_Q), _fmt(dr.var_delta_Q), _fmt(dr.ci_half_width), _fmt(dr.delta_E)))
        _out(cfg, "differences.csv").write_text(
            _csv_text(("model", "reference", "delta_Q", "var_delta_Q", "ci_half_width", "delta_E"), rows)
        )
    return reports


def cmd_hypersearch(cfg, args):
    ev, hs = cfg.evaluation, cfg.hypersearch
    if ev.hyper_seed == cfg.seed:
        raise ConfigError("evaluation.hyper_seed must differ from the evaluation seed")
    if not hs.lam or not hs.eta:
        raise ConfigError("hypersearch grid is empty")
    if hs.model not in ("rff", "fourier"):
        raise ConfigError("hypersearch supports models rff and fourier")
    _, slices = _read_dataset(cfg, args.data)
    sample = _sample_slices(slices, ev.hyper_samples, ev.hyper_seed, ev.folds)
    origin = _dataset_origin(cfg, slices)
    rows, best = [], None
    for lam in hs.lam:
        for eta in hs.eta:
            fam = _family(hs.model, cfg, origin, lam=float(lam), eta=float(eta))
            rep = aggregate(_score_parallel(fam, sample, ev.hyper_seed, ev.folds, cfg.worker_count))
            rows.append((_fmt(lam), _fmt(eta), _fmt(rep.E_tilde), _fmt(rep.var_E)))
            if best is None or rep.E_tilde < best[2]:
                best = (float(lam), float(eta), rep.E_tilde)
    _out(cfg, "hypersearch.csv").write_text(_csv_text(("lambda", "eta", "E_tilde", "var"), rows))
    _write_json(_out(cfg, "hypersearch_best.json"), {"config": cfg.to_dict(), "lambda": best[0], "eta": best[1], "E_tilde": best[2]})
    print(f"best lambda {best[0]} eta {best[1]} E_tilde {best[2]:.4f}")


def reconstruct_grid(model, bbox, nx, ny, with_div=False):
    """Rows (x, y, u, v[, div]) over an nx-by-ny lattice spanning ``bbox``.

    Divergence uses central differences with a step of 1e-4 of the box extent.
    """
    (x0, y0), (x1, y1) = bbox
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([(x0 + x1) / 2])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([(y0 + y1) / 2])
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    uv = model.predict(pts)
    cols = [pts[:, 0], pts[:, 1], uv[:, 0], uv[:, 1]]
    if with_div:
        hx = 1e-4 * max(x1 - x0, 1e-12)
        hy = 1e-4 * max(y1 - y0, 1e-12)
        ex = np.array([hx, 0.0])
        ey = np.array([0.0, hy])
        du = (model.predict(pts + ex)[:, 0] - model.predict(pts - ex)[:, 0]) / (2 * hx)
        dv = (model.predict(pts + ey)[:, 1] - model.predict(pts - ey)[:, 1]) / (2 * hy)
        cols.append(du + dv)
    return np.column_stack(cols)


def cmd_reconstruct(cfg, args):
    _, slices = _read_dataset(cfg, args.data)
    sl = _find_slice(slices, args.time)
    fam = _family(args.model, cfg, _dataset_origin(cfg, slices), _load_truth(args.truth))
    model = fam(sl)
    if args.bbox:
        x0, y0, x1, y1 = args.bbox
    else:
        (x0, y0), (x1, y1) = sl.points[:, :2].min(axis=0), sl.points[:, :2].max(axis=0)
    grid = reconstruct_grid(model, ((x0, y0), (x1, y1)), args.nx, args.ny, args.div)
    header = ("x", "y", "u", "v", "div") if args.div else ("x", "y", "u", "v")
    _out(cfg, "reconstruct.csv").write_text(_csv_text(header, [[repr(float(v)) for v in r] for r in grid]))
    print(f"{len(grid)} grid points")


def autocorrelation(series, max_lag):
    """Sample autocorrelation at lags 0..max_lag; None where undefined."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    xc = x - x.mean()
    c0 = float(xc @ xc) / n
    if c0 == 0:
        return None
    out = []
    for lag in range(max_lag + 1):
        out.append(float(xc[: n - lag] @ xc[lag:]) / n / c0 if lag < n else None)
    return out


def cmd_autocorr(cfg, args):
    _, slices = _read_dataset(cfg, args.data)
    series = {}
    for sl in slices:
        for sid, vel in zip(sl.station_ids, sl.velocities):
            series.setdefault(sid, []).append(vel)
    rows = []
    for sid in sorted(series):
        vals = np.array(series[sid])
        if len(vals) < 2:
            log.warning("station %s has fewer than 2 observations; skipped", sid)
            continue
        for ci, comp in enumerate(("u", "v")):
            acf = autocorrelation(vals[:, ci], args.max_lag)
            if acf is None:
                log.warning("station %s component %s is constant; autocorrelation undefined", sid, comp)
                acf = [None] * (args.max_lag + 1)
            rows.extend((sid, comp, lag, _fmt(a)) for lag, a in enumerate(acf))
    _out(cfg, "autocorr.csv").write_text(_csv_text(("station_id", "component", "lag", "acf"), rows))
    print(f"{len(rows)} rows")


def cmd_oracle(cfg, args):
    try:
        profile = SpectralProfile.from_dict(json.loads(Path(args.profile).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read profile {args.profile}: {exc}") from None
    bp = BoundParams(args.K, args.lam, args.cbar)
    rho_opt = optimal_density(profile)
    rho_uni = uniform_density(profile)
    out = {
        "optimal_density": rho_opt.tolist(),
        "bound_optimal": bound_value(profile, rho_opt, bp),
        "bound_uniform": bound_value(profile, rho_uni, bp),
    }
    if len(profile.norms) <= 6:
        rho_bf = brute_force_density_argmin(profile, args.resolution)
        out["brute_force_density"] = rho_bf.tolist()
        out["brute_force_linf"] = float(np.abs(rho_bf - rho_opt).max())
        out["bound_brute_force"] = bound_value(profile, rho_bf, bp)
    text = json.dumps(out, indent=2, default=_json_default)
    print(text)
    if args.out_json:
        _write_json(_out(cfg, "oracle.json"), dict(out, config=cfg.to_dict(), K=args.K, lam=args.lam, cbar=args.cbar))


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="windfield", description="Wind field interpolation toolkit")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (0 = all cores)")
    p.add_argument("--out-dir")
    p.add_argument("--wind-convention", choices=("heading-ccw", "meteo"))
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_data(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("data", nargs="?", help="observation CSV (default: config 'data')")
        return s

    with_data("ingest", "parse and project observations")

    s = sub.add_parser("synth", help="generate a synthetic observation set")
    s.add_argument("--kind", choices=("stream", "single"), default="stream")
    s.add_argument("--stations", type=int, default=171)
    s.add_argument("--times", type=int, default=10)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--modes", type=int, default=5)
    s.add_argument("--max-mode", type=int, default=3)
    s.add_argument("--mode", type=int, nargs=2, default=(1, 2))

    for name in ("fit-rff", "fit-fourier"):
        with_data(name, f"train {name[4:]} on one slice").add_argument("--time")
    s = with_data("fit-baseline", "train a baseline on one slice")
    s.add_argument("--model", choices=("nn", "idw", "kriging", "forest"), required=True)
    s.add_argument("--time")

    s = with_data("evaluate", "cross-validated quality of fit")
    s.add_argument("--models", help="comma-separated, first is the difference reference")
    s.add_argument("--truth", help="synth sidecar JSON for the 'truth' model")

    with_data("hypersearch", "grid search over lambda and eta")

    s = with_data("reconstruct", "evaluate a fitted model on a regular grid")
    s.add_argument("--time")
    s.add_argument("--model", choices=MODEL_NAMES, default="rff")
    s.add_argument("--truth")
    s.add_argument("--nx", type=int, default=50)
    s.add_argument("--ny", type=int, default=50)
    s.add_argument("--bbox", type=float, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    s.add_argument("--div", action="store_true", help="add a divergence column")

    s = with_data("autocorr", "per-station autocorrelation of u and v")
    s.add_argument("--max-lag", type=int, default=300)

    s = sub.add_parser("oracle", help="optimal density and bound for a spectral profile")
    s.add_argument("profile")
    s.add_argument("--K", type=int, default=400)
    s.add_argument("--lam", type=float, default=0.0)
    s.add_argument("--cbar", type=float, default=0.0)
    s.add_argument("--resolution", type=float, default=0.005)
    s.add_argument("--out-json", action="store_true")
    return p


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "fit-rff": cmd_fit_rff,
    "fit-fourier": cmd_fit_fourier,
    "fit-baseline": cmd_fit_baseline,
    "evaluate": cmd_evaluate,
    "hypersearch": cmd_hypersearch,
    "reconstruct": cmd_reconstruct,
    "autocorr": cmd_autocorr,
    "oracle": cmd_oracle,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(
            args.config,
            {"seed": args.seed, "jobs": args.jobs, "out_dir": args.out_dir, "wind_convention": args.wind_convention},
        )
        COMMANDS[args.command](cfg, args)
    except WindFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
