"""Batch command-line front end.

Subcommands: far, frr, roc, train, gen, synth, report.  Every run writes a
manifest.json echoing the resolved configuration (timestamps appear only
there, so all other outputs are byte-deterministic for identical inputs).

Exit codes: 0 success; 2 malformed input/config (including missing labels);
3 empty comparison set or a target below resolution; 4 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .embeddings import (EmbeddingSet, ScoreScale, load_embeddings, normalize,
                         save_embeddings)
from .errors import (DivergenceError, EmptyComparisonError, FormatError,
                     IdemError, ResolutionError)
from .metrics import (BETWEEN, WITHIN_MATED, WITHIN_NONMATED, ComparisonSpec,
                      default_grid, far_curve, frr_at_far, frr_at_threshold,
                      frr_curve, make_grid, nn_far_curve, overfit_report,
                      roc_curve, threshold_for_far, write_curve_csv)
from .synthgen import MixtureSpec, PathologySpec, gen_identity_clouds, make_fake_set
from .gan.train import (LatentSpec, TrainConfig, build_model,
                        generate_identity_sets, load_model, save_model, train,
                        write_trace_csv)


def _parse_grid(args) -> np.ndarray | None:
    if args.grid_list:
        try:
            return make_grid([float(v) for v in args.grid_list.split(",")])
        except ValueError as exc:
            raise FormatError(f"--grid-list: {exc}") from None
    if args.grid:
        parts = args.grid.split(":")
        if len(parts) != 3:
            raise FormatError(f"--grid expects min:max:points, got {args.grid!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise FormatError(f"--grid: {exc}") from None
        if n < 1 or not lo < hi:
            raise FormatError(f"--grid needs min < max and points >= 1, got {args.grid!r}")
        return make_grid(np.linspace(lo, hi, n))
    return None


def _parse_scale(text: str) -> ScoreScale:
    parts = text.split(":")
    if len(parts) != 2:
        raise FormatError(f"--scale expects alpha:beta, got {text!r}")
    try:
        return ScoreScale(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise FormatError(f"--scale: {exc}") from None


def _load_normalized(path: str, labels_path: str | None = None) -> EmbeddingSet:
    es = load_embeddings(path)
    if labels_path:
        labels = Path(labels_path).read_text(encoding="utf-8").splitlines()
        es = EmbeddingSet(es.name, np.array(es.rows), tuple(labels), normalized=False)
    return normalize(es)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, args, extra: dict | None = None) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "command": command,
        "config": config,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(
        json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n", encoding="utf-8")


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# far / report

def cmd_far(args) -> int:
    out = _outdir(args)
    scale = _parse_scale(args.scale)
    grid = _parse_grid(args)
    opts = dict(workers=args.workers)
    real = _load_normalized(args.real, args.labels)
    written = []

    if args.mode in ("all", "within", "nn") and real.labels is None:
        raise FormatError("labels required for within-set comparisons on --real")
    fake = None
    if args.fake:
        fake = _load_normalized(args.fake)
    elif args.mode in ("all", "between", "nn"):
        raise FormatError(f"--fake required for mode {args.mode!r}")

    specs = {}
    if args.mode in ("all", "within", "nn"):
        specs["real_vs_real"] = ComparisonSpec(WITHIN_NONMATED, real, scale=scale)
    if args.mode in ("all", "between", "nn"):
        specs["fake_vs_real"] = ComparisonSpec(BETWEEN, fake, real, scale=scale)
    if args.mode in ("all", "nn"):
        specs["fake_vs_fake"] = ComparisonSpec(WITHIN_NONMATED, fake, scale=scale)
    if grid is None:
        grid = default_grid(*specs.values(), **opts)

    for name, spec in specs.items():
        if args.mode != "nn":
            curve = far_curve(spec, grid, **opts)
            write_curve_csv(curve, out / f"{name}.csv")
            written.append(f"{name}.csv")
        if args.nn or args.mode == "nn":
            curve = nn_far_curve(spec, grid, **opts)
            write_curve_csv(curve, out / f"{name}_nn.csv")
            written.append(f"{name}_nn.csv")

    if args.mode == "all":
        report = overfit_report(real, fake, grid, **opts)
        _write_json(out / "report.json", report.to_json_dict())
        written.append("report.json")
    _write_manifest(out, "far", args, {"outputs": written})
    return 0


def cmd_report(args) -> int:
    out = _outdir(args)
    real = _load_normalized(args.real, args.labels)
    if real.labels is None:
        raise FormatError("labels required on --real")
    fake = _load_normalized(args.fake)
    report = overfit_report(real, fake, _parse_grid(args), workers=args.workers)
    _write_json(out / "report.json", report.to_json_dict())
    _write_manifest(out, "report", args, {"outputs": ["report.json"]})
    return 0


# ---------------------------------------------------------------------------
# frr / roc

def _mated_nonmated(args):
    scale = _parse_scale(args.scale)
    mated_set = _load_normalized(args.mated, args.labels)
    if mated_set.labels is None:
        raise FormatError("labels required on --mated")
    nm_set = _load_normalized(args.nonmated) if args.nonmated else mated_set
    mated = ComparisonSpec(WITHIN_MATED, mated_set, scale=scale)
    nonmated = ComparisonSpec(WITHIN_NONMATED, nm_set, scale=scale)
    return mated, nonmated


def _threshold_stats(args, mated, nonmated, opts) -> dict:
    stats = {"mated_total": mated.total_comparisons(),
             "nonmated_total": nonmated.total_comparisons()}
    if args.threshold is not None:
        stats["threshold"] = args.threshold
        stats["frr_at_threshold"] = frr_at_threshold(mated, args.threshold, **opts)
    if args.target_far is not None:
        t, frr = frr_at_far(mated, nonmated, args.target_far, **opts)
        stats["target_far"] = args.target_far
        stats["threshold_at_far"] = t
        stats["frr_at_far"] = frr
    return stats


def cmd_frr(args) -> int:
    out = _outdir(args)
    mated, nonmated = _mated_nonmated(args)
    opts = dict(workers=args.workers)
    grid = _parse_grid(args)
    if grid is None:
        grid = default_grid(mated, **opts)
    write_curve_csv(frr_curve(mated, grid, **opts), out / "frr.csv")
    _write_json(out / "stats.json", _threshold_stats(args, mated, nonmated, opts))
    _write_manifest(out, "frr", args, {"outputs": ["frr.csv", "stats.json"]})
    return 0


def cmd_roc(args) -> int:
    out = _outdir(args)
    mated, nonmated = _mated_nonmated(args)
    opts = dict(workers=args.workers)
    grid = _parse_grid(args)
    if grid is None:
        grid = default_grid(mated, nonmated, **opts)
    roc = roc_curve(mated, nonmated, grid, **opts)
    lines = ["threshold,far,frr"]
    for t, fa, fr in zip(roc.grid, roc.far, roc.frr):
        lines.append(f"{float(t)!r},{fa:.10g},{fr:.10g}")
    (out / "roc.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "stats.json", _threshold_stats(args, mated, nonmated, opts))
    _write_manifest(out, "roc", args, {"outputs": ["roc.csv", "stats.json"]})
    return 0


# ---------------------------------------------------------------------------
# train / gen / synth

_TRAIN_KEYS = {
    "data": str, "variant": str, "steps": int, "seed": int, "init_seed": int,
    "d_id": int, "d_iv": int, "gen_hidden": list, "clip": float, "lam": float,
    "negative_pool_quantile": float, "n_critic": int, "batch": int,
    "optimizer": str, "lr": float, "beta1": float, "beta2": float,
}
_TRAIN_DEFAULTS = {
    "variant": "triplet", "steps": 1500, "seed": 0, "init_seed": 0,
    "d_id": 8, "d_iv": 8, "gen_hidden": [64, 64], "clip": 0.05, "lam": 0.001,
    "negative_pool_quantile": 0.05, "n_critic": 5, "batch": 64,
    "optimizer": "adam", "lr": 1e-3, "beta1": 0.0, "beta2": 0.99,
}


def _load_train_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(raw, dict) or "data" not in raw:
        raise FormatError(f"{path}: training config must be an object with a 'data' path")
    unknown = set(raw) - set(_TRAIN_KEYS)
    if unknown:
        raise FormatError(f"{path}: unknown config keys {sorted(unknown)}")
    cfg = dict(_TRAIN_DEFAULTS)
    cfg.update(raw)
    for key, typ in _TRAIN_KEYS.items():
        if key in cfg and not isinstance(cfg[key], typ) and not (typ is float and isinstance(cfg[key], int)):
            raise FormatError(f"{path}: {key} must be {typ.__name__}")
    return cfg


def cmd_train(args) -> int:
    out = _outdir(args)
    cfg = _load_train_config(args.config)
    dataset = _load_normalized(cfg["data"])
    model = build_model(
        d_x=dataset.dim, latent=LatentSpec(cfg["d_id"], cfg["d_iv"]),
        gen_hidden=tuple(cfg["gen_hidden"]), clip=cfg["clip"], seed=cfg["init_seed"])
    tc = TrainConfig(
        variant=cfg["variant"], lam=cfg["lam"],
        negative_pool_quantile=cfg["negative_pool_quantile"],
        n_critic=cfg["n_critic"], batch=cfg["batch"], optimizer=cfg["optimizer"],
        lr=cfg["lr"], beta1=cfg["beta1"], beta2=cfg["beta2"])
    trace = train(model, dataset, tc, steps=cfg["steps"], seed=cfg["seed"])
    save_model(model, out / "checkpoint.sdgt")
    write_trace_csv(trace, out / "trace.csv")
    _write_manifest(out, "train", args,
                    {"resolved_config": cfg, "outputs": ["checkpoint.sdgt", "trace.csv"]})
    return 0


def cmd_gen(args) -> int:
    out = _outdir(args)
    model = load_model(args.checkpoint)
    es = generate_identity_sets(model, args.ids, args.per_id, args.seed, name="samples")
    save_embeddings(es, out / "samples.idem")
    _write_manifest(out, "gen", args,
                    {"outputs": ["samples.idem", "samples.idem.labels"]})
    return 0


_SYNTH_CLOUD_KEYS = {"kind", "K", "m", "dim", "within_sigma", "seed", "name"}
_SYNTH_FAKE_KEYS = {"kind", "real", "n_fake", "seed", "memorize_fraction",
                    "perturb_eps", "collapse_k", "collapse_sigma", "name"}


def cmd_synth(args) -> int:
    out = _outdir(args)
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{args.spec}: {exc}") from None
    if not isinstance(raw, dict):
        raise FormatError(f"{args.spec}: spec must be a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    kind = raw.get("kind")
    if kind == "clouds":
        unknown = set(raw) - _SYNTH_CLOUD_KEYS
        if unknown:
            raise FormatError(f"{args.spec}: unknown keys {sorted(unknown)}")
        try:
            spec = MixtureSpec(K=raw["K"], m=raw["m"], dim=raw["dim"],
                               within_sigma=raw["within_sigma"], seed=raw["seed"],
                               name=raw.get("name", "clouds"))
        except KeyError as exc:
            raise FormatError(f"{args.spec}: missing key {exc}") from None
        es = gen_identity_clouds(spec)
    elif kind == "fake":
        unknown = set(raw) - _SYNTH_FAKE_KEYS
        if unknown:
            raise FormatError(f"{args.spec}: unknown keys {sorted(unknown)}")
        try:
            real = normalize(load_embeddings(raw["real"]))
            pathology = PathologySpec(
                memorize_fraction=raw.get("memorize_fraction", 0.0),
                perturb_eps=raw.get("perturb_eps", 0.0),
                collapse_k=raw.get("collapse_k"),
                collapse_sigma=raw.get("collapse_sigma", 0.05))
            es = make_fake_set(real, pathology, raw["n_fake"], raw["seed"],
                               name=raw.get("name", "fake"))
        except KeyError as exc:
            raise FormatError(f"{args.spec}: missing key {exc}") from None
    else:
        raise FormatError(f"{args.spec}: kind must be 'clouds' or 'fake'")
    path = out / f"{es.name}.idem"
    save_embeddings(es, path)
    outputs = [path.name] + ([path.name + ".labels"] if es.labels else [])
    _write_manifest(out, "synth", args, {"outputs": outputs})
    return 0


# ---------------------------------------------------------------------------

def _add_metric_flags(p, mated=False):
    if mated:
        p.add_argument("--mated", required=True, help="labeled embedding file")
        p.add_argument("--nonmated", help="embedding file for non-mated scores (default: --mated)")
    else:
        p.add_argument("--real", required=True, help="real embedding file")
        p.add_argument("--fake", help="synthetic embedding file")
    p.add_argument("--labels", help="explicit labels sidecar for the primary input")
    p.add_argument("--grid", help="threshold grid as min:max:points")
    p.add_argument("--grid-list", help="explicit comma-separated thresholds")
    p.add_argument("--scale", default="1:0", help="score scale alpha:beta (default 1:0)")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idem", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"idem {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("far", help="FAR curves and overfit report for a real/fake pair")
    _add_metric_flags(p)
    p.add_argument("--mode", choices=("all", "within", "between", "nn"), default="all")
    p.add_argument("--nn", action="store_true", help="also write nearest-neighbour curves")
    p.set_defaults(func=cmd_far)

    p = sub.add_parser("report", help="overfit/collapse report JSON only")
    _add_metric_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("frr", help="FRR curve and threshold statistics")
    _add_metric_flags(p, mated=True)
    p.add_argument("--threshold", type=float, help="report FRR at this score threshold")
    p.add_argument("--target-far", type=float, help="report FRR at the threshold reaching this FAR")
    p.set_defaults(func=cmd_frr)

    p = sub.add_parser("roc", help="ROC curve over a shared grid")
    _add_metric_flags(p, mated=True)
    p.add_argument("--threshold", type=float, help="report FRR at this score threshold")
    p.add_argument("--target-far", type=float, help="report FRR at the threshold reaching this FAR")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("train", help="train the paired-critic GAN from a JSON config")
    p.add_argument("--config", required=True, help="training config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gen", help="sample labeled identity sets from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ids", type=int, required=True, help="number of identities")
    p.add_argument("--per-id", type=int, required=True, help="rows per identity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("synth", help="generate synthetic embedding worlds from a JSON spec")
    p.add_argument("--spec", required=True, help="mixture/pathology spec JSON")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EmptyComparisonError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except IdemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
