"""The five subcommands: train, eval, validate, ablate, app.

Directory-producing commands (train, validate, ablate, app) store the
config they ran from, write a manifest, and refuse to reuse a finished
output directory without --force.  eval writes a single file and has
no manifest.  All stdout/file output is deterministic for a fixed
(config, seed); progress chatter goes to stderr.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import apps
from ..oracle import write_error_csv
from ..variational import GreenModel, TrainConfig, train
from ..variational.losses import make_energy
from ..variational.model import ModelError
from ..variational.train import TrainingDiverged
from . import render
from .cases import CASES, run_case
from .config import (
    build_model,
    build_train_config,
    load_config,
    load_shipped_config,
    resolve_seed,
)
from .errors import NumericalFailure, UsageError
from .manifest import prepare_out_dir, store_config, utc_now, write_manifest

__all__ = ["cmd_train", "cmd_eval", "cmd_validate", "cmd_ablate", "cmd_app"]

CHECKPOINT_NAME = "model.json"
STAGE1_CHECKPOINT_NAME = "model.stage1.json"


# ----------------------------------------------------------------------
# shared helpers
# ----------------------------------------------------------------------


def _load_model_file(path) -> GreenModel:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"checkpoint {p} does not exist")
    try:
        return GreenModel.load(p)
    except ModelError as exc:
        raise UsageError(f"cannot load checkpoint {p}: {exc}") from exc


def _parse_point(text: str, dim: int, what: str = "point") -> np.ndarray:
    try:
        values = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse {what} {text!r}: {exc}") from exc
    if len(values) != dim:
        raise UsageError(f"{what} {text!r} has {len(values)} coordinates, model is {dim}-d")
    return np.asarray(values, dtype=np.float64)


def _parse_cond(text: str | None) -> dict:
    cond = {}
    if not text:
        return cond
    for piece in text.split(","):
        if "=" not in piece:
            raise UsageError(f"--cond entries look like k=2.0 or z=0.3, got {piece!r}")
        key, _, value = piece.partition("=")
        key = key.strip()
        if key not in ("k", "z"):
            raise UsageError(f"unknown conditioning variable {key!r} (expected k or z)")
        try:
            cond[key] = float(value)
        except ValueError as exc:
            raise UsageError(f"bad value in --cond: {piece!r}") from exc
    return cond


def _progress_printer(total_epochs: int, quiet: bool):
    if quiet:
        return None
    step = max(1, total_epochs // 20)

    def progress(stage, epoch, raw, smoothed):
        if epoch % step == step - 1 or epoch == total_epochs - 1:
            print(
                f"  [{stage}] epoch {epoch + 1}/{total_epochs} "
                f"loss {raw:.6g} smoothed {smoothed:.6g}",
                file=sys.stderr,
            )

    return progress


def _existing(out: Path, names) -> list[str]:
    return [name for name in names if (out / name).exists()]


def _stage_records(result, model) -> list[dict]:
    records = []
    for stage in result.stages:
        rec = {
            "name": stage.name,
            "epochs_run": stage.epochs_run,
            "stopped_early": stage.stopped_early,
            "final_loss": stage.final_loss,
            "best_smoothed": stage.best_smoothed,
        }
        if len(result.stages) == 1:
            rec["history"] = "history.csv"
            rec["checkpoint"] = CHECKPOINT_NAME
        else:
            rec["history"] = f"history.{stage.name}.csv"
            rec["checkpoint"] = (
                STAGE1_CHECKPOINT_NAME if stage.name == "stage1" else CHECKPOINT_NAME
            )
        records.append(rec)
    return records


def _save_checkpoints(model: GreenModel, out: Path) -> list[str]:
    model.save(out / CHECKPOINT_NAME)
    written = [CHECKPOINT_NAME]
    if model.operator == "biharmonic":
        model.stage1_model().save(out / STAGE1_CHECKPOINT_NAME)
        written.append(STAGE1_CHECKPOINT_NAME)
    return written


def _train_into(model, cfg, seed, out: Path, argv, sha, seed_source, quiet, *, energy=None):
    """Run training, saving checkpoints and the manifest; exit 3 on divergence."""
    tconf = build_train_config(cfg, seed, history_path=out / "history.csv")
    started = utc_now()
    history_names = (
        ["history.csv"]
        if model.operator != "biharmonic"
        else ["history.stage1.csv", "history.stage2.csv"]
    )
    try:
        result = train(model, tconf, energy=energy,
                       progress=_progress_printer(tconf.epochs, quiet))
    except TrainingDiverged as exc:
        # parameters were rolled back to the last finite state; keep them
        saved = _save_checkpoints(model, out)
        write_manifest(
            out,
            command="train",
            argv=argv,
            started=started,
            seed=seed,
            seed_source=seed_source,
            config_sha256=sha,
            outputs=["config.json"] + saved + _existing(out, history_names),
            extra={"status": "diverged", "detail": str(exc)},
        )
        raise NumericalFailure(str(exc)) from exc
    return result, started, history_names


# ----------------------------------------------------------------------
# train
# ----------------------------------------------------------------------


def cmd_train(args) -> int:
    raw, cfg = load_config(args.config)
    seed, seed_source = resolve_seed(cfg)
    out = prepare_out_dir(args.out, args.force)
    sha = store_config(out, raw)
    model = build_model(cfg, seed)

    result, started, history_names = _train_into(
        model, cfg, seed, out, args.argv, sha, seed_source, args.quiet
    )
    saved = _save_checkpoints(model, out)
    write_manifest(
        out,
        command="train",
        argv=args.argv,
        started=started,
        seed=seed,
        seed_source=seed_source,
        config_sha256=sha,
        outputs=["config.json"] + saved + _existing(out, history_names),
        extra={"status": "ok", "stages": _stage_records(result, model)},
    )
    for stage in result.stages:
        tag = " (early stop)" if stage.stopped_early else ""
        print(f"{stage.name}: {stage.epochs_run} epochs, "
              f"final smoothed loss {stage.best_smoothed:.6g}{tag}")
    print(f"checkpoint: {out / CHECKPOINT_NAME}")
    return 0


# ----------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    model = _load_model_file(args.checkpoint)
    cond = _parse_cond(args.cond)
    source = _parse_point(args.source, model.dim, "--source")
    if args.grid < 2:
        raise UsageError(f"--grid must be at least 2, got {args.grid}")

    try:
        domain = model.realized_domain(cond.get("z"))
    except (ModelError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if not bool(domain.inside(source[None])[0]):
        raise UsageError(f"source {args.source} lies outside the domain")

    out = Path(args.out)
    suffix = out.suffix.lower()
    if suffix not in (".csv", ".ppm"):
        raise UsageError(f"--out must end in .csv or .ppm, got {out.name}")
    if suffix == ".ppm" and model.dim != 2:
        raise UsageError("ppm heatmaps are 2-d; use .csv for this model")

    lo, hi = domain.bbox()
    axes = [np.linspace(lo[i], hi[i], args.grid) for i in range(model.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    mask = domain.inside(pts)

    values = np.full(len(pts), np.nan)
    try:
        values[mask] = apps.regularized_green(
            model, pts[mask], np.tile(source, (int(mask.sum()), 1)),
            k=cond.get("k"), z=cond.get("z"),
        )
    except (ModelError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    out.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".csv":
        render.write_points_csv(out, pts[mask], values[mask])
        print(f"wrote {int(mask.sum())} interior values to {out}")
    else:
        grid = values.reshape(args.grid, args.grid)
        render.write_ppm(out, np.nan_to_num(grid), mask.reshape(args.grid, args.grid))
        print(f"wrote {args.grid}x{args.grid} heatmap to {out}")
    return 0


# ----------------------------------------------------------------------
# validate
# ----------------------------------------------------------------------


def cmd_validate(args) -> int:
    if args.case not in CASES:
        raise UsageError(f"unknown case {args.case!r}; choose from {sorted(CASES)}")
    spec = CASES[args.case]

    if args.config is not None:
        raw, cfg = load_config(args.config)
    else:
        raw, cfg = load_shipped_config(f"validate/{args.case}.json")
    seed, seed_source = resolve_seed(cfg)
    out = prepare_out_dir(args.out, args.force)
    sha = store_config(out, raw)

    trained = False
    stages = None
    started = utc_now()
    if args.checkpoint is not None:
        model = _load_model_file(args.checkpoint)
    else:
        model = build_model(cfg, seed)
        result, started, history_names = _train_into(
            model, cfg, seed, out, args.argv, sha, seed_source, args.quiet
        )
        _save_checkpoints(model, out)
        stages = _stage_records(result, model)
        trained = True

    case_result, passed = run_case(args.case, model, seed)
    report = case_result.report

    write_error_csv(report, out / "report.csv")
    figures = _case_figures(out, spec, case_result, trained)

    summary = {
        "case": args.case,
        "operator": spec.operator,
        "metric": spec.metric,
        "threshold": spec.threshold,
        "passed": bool(passed),
        "aggregate_relative_error": report.aggregate,
        "worst_relative_error": report.worst,
        "n_sources": len(report.per_source),
        "seed": seed,
        "trained": trained,
        "checkpoint": CHECKPOINT_NAME if trained else str(args.checkpoint),
    }
    summary.update(case_result.summary)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    outputs = ["config.json", "report.csv", "summary.json"] + figures
    if trained:
        outputs += _existing(out, [CHECKPOINT_NAME, STAGE1_CHECKPOINT_NAME,
                                   "history.csv", "history.stage1.csv",
                                   "history.stage2.csv"])
    extra = {"status": "ok", "case": args.case, "passed": bool(passed)}
    if stages is not None:
        extra["stages"] = stages
    write_manifest(
        out,
        command="validate",
        argv=args.argv,
        started=started,
        seed=seed,
        seed_source=seed_source,
        config_sha256=sha,
        outputs=outputs,
        extra=extra,
    )

    value = case_result.summary["value"]
    label = "sup error" if spec.metric == "sup" else "mean relative error"
    verdict = "PASS" if passed else "FAIL"
    print(f"case {args.case}: {label} {value:.6g} vs threshold {spec.threshold:g} -> {verdict}")
    return 0


def _case_figures(out: Path, spec, case_result, trained: bool) -> list[str]:
    written = []
    data = case_result.figure_data
    if case_result.figure_kind == "1d":
        curves = []
        for s, pred, ref in zip(data["sources"], data["predicted"], data["reference"]):
            curves.append((f"learned, s={s:.3f}", pred, {"linewidth": 1.2}))
            curves.append((f"reference, s={s:.3f}", ref,
                           {"linewidth": 1.0, "linestyle": "--", "color": "black"}))
        render.profile_figure(out / "comparison.png", data["x"], curves,
                              title=f"{spec.name}: learned vs closed form")
        written.append("comparison.png")
    elif case_result.figure_kind == "2d":
        sx, sy = data["source"]
        render.comparison_figure(
            out / "comparison.png", data["xs"], data["ys"],
            data["model_grid"], data["oracle_grid"], data["mask"],
            title=f"{spec.name}, source ({sx:.3f}, {sy:.3f})",
        )
        written.append("comparison.png")
    elif case_result.figure_kind == "mesh":
        sx, sy = data["source"]
        render.fem_comparison_figure(
            out / "comparison.png", data["vertices"], data["triangles"],
            data["model_vals"], data["oracle_vals"],
            title=f"{spec.name}, source ({sx:.3f}, {sy:.3f})",
        )
        written.append("comparison.png")

    rel = [row.relative for row in case_result.report.per_source]
    render.source_error_figure(out / "source-errors.png", rel, spec.threshold,
                               title=f"{spec.name}: per-source relative error")
    written.append("source-errors.png")

    if trained:
        histories = [(name, out / name) for name in
                     ("history.csv", "history.stage1.csv", "history.stage2.csv")
                     if (out / name).exists()]
        if histories:
            render.history_figure(out / "loss.png", histories,
                                  title=f"{spec.name}: training loss")
            written.append("loss.png")
    return written


# ----------------------------------------------------------------------
# ablate
# ----------------------------------------------------------------------

_STUDIES = ("hyper-vs-single", "sifting")


def _ablate_run(payload: dict) -> dict:
    """One training run of an ablation study.  Top-level so it pickles
    for --parallel; rebuilds everything from plain data."""
    cfg = payload["cfg"]
    seed = payload["seed"]
    run_dir = Path(payload["run_dir"])
    run_dir.mkdir(parents=True, exist_ok=True)

    model = build_model(cfg, seed)
    tconf = build_train_config(cfg, seed, history_path=run_dir / "history.csv")
    tconf = replace(tconf, single_source=payload["single_source"])
    energy = None
    if payload["include_sifting"]:
        try:
            energy = make_energy(model, lambda_mean=tconf.lambda_mean, include_sifting=True)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    try:
        result = train(model, tconf, energy=energy)
    except TrainingDiverged as exc:
        raise NumericalFailure(f"run {payload['name']}: {exc}") from exc
    model.save(run_dir / CHECKPOINT_NAME)

    record = {
        "name": payload["name"],
        "variant": payload["variant"],
        "seed": seed,
        "pair": payload["pair"],
        "run_dir": str(run_dir),
        "epochs_run": result.final.epochs_run,
        "best_smoothed": result.final.best_smoothed,
        "smoothed": [h[2] for h in result.final.history],
    }
    if payload["max_g_sources"] is not None:
        sources = np.asarray(payload["max_g_sources"])
        domain = model.realized_domain()
        lo, hi = domain.bbox()
        axes = [np.linspace(lo[i], hi[i], 64) for i in range(model.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
        pts = pts[domain.inside(pts)]
        best = 0.0
        for s in sources:
            g = model.evaluate(pts, np.tile(s, (len(pts), 1)), regularized=True)
            best = max(best, float(np.abs(g).max()))
        record["max_abs_g"] = best
    return record


def _epochs_to_threshold(smoothed: list, threshold: float) -> int:
    for epoch, value in enumerate(smoothed):
        if value <= threshold:
            return epoch + 1
    return len(smoothed)


def cmd_ablate(args) -> int:
    if args.study not in _STUDIES:
        raise UsageError(f"unknown study {args.study!r}; choose from {_STUDIES}")
    if args.pairs < 1:
        raise UsageError("--pairs must be at least 1")

    if args.config is not None:
        raw, cfg = load_config(args.config)
    else:
        raw, cfg = load_shipped_config(f"ablate/{args.study}.json")
    seed, seed_source = resolve_seed(cfg)
    out = prepare_out_dir(args.out, args.force)
    sha = store_config(out, raw)
    started = utc_now()

    if args.study == "hyper-vs-single":
        variants = [("hyper", {"single_source": False, "include_sifting": False}),
                    ("single", {"single_source": True, "include_sifting": False})]
        max_g_sources = None
    else:
        if cfg["operator"] != "laplace":
            raise UsageError("the sifting study applies to the laplace energy")
        variants = [("plain", {"single_source": False, "include_sifting": False}),
                    ("sifting", {"single_source": False, "include_sifting": True})]
        probe_model = build_model(cfg, seed)
        rng = np.random.default_rng([seed, 777])
        domain = probe_model.realized_domain()
        cand = domain.sample_interior(64, rng)
        margin = 0.15 * domain.inradius_estimate()
        max_g_sources = cand[domain.boundary_distance(cand) > margin][:3].tolist()

    payloads = []
    for pair in range(args.pairs):
        for variant, flags in variants:
            name = f"{variant}-seed{seed + pair}"
            payloads.append({
                "cfg": cfg,
                "seed": seed + pair,
                "pair": pair,
                "variant": variant,
                "name": name,
                "run_dir": str(out / "runs" / name),
                "single_source": flags["single_source"],
                "include_sifting": flags["include_sifting"],
                "max_g_sources": max_g_sources,
            })

    if args.parallel:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=min(len(payloads), ctx.cpu_count() or 2)) as pool:
            records = pool.map(_ablate_run, payloads)
    else:
        records = []
        for payload in payloads:
            if not args.quiet:
                print(f"running {payload['name']} ...", file=sys.stderr)
            records.append(_ablate_run(payload))

    # pair A and B at equal seed; the threshold is the loss level the
    # weaker run still reaches, so epochs-to-threshold is comparable
    by_pair = {}
    for rec in records:
        by_pair.setdefault(rec["pair"], []).append(rec)
    rows = []
    for pair, recs in sorted(by_pair.items()):
        threshold = max(min(r["smoothed"]) for r in recs)
        for rec in recs:
            rec["threshold"] = threshold
            rec["epochs_to_threshold"] = _epochs_to_threshold(rec["smoothed"], threshold)
            rows.append(rec)

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["study", "pair", "seed", "variant", "epochs_run",
                  "epochs_to_threshold", "threshold", "best_smoothed"]
        if args.study == "sifting":
            header.append("max_abs_g")
        writer.writerow(header)
        for rec in rows:
            row = [args.study, rec["pair"], rec["seed"], rec["variant"],
                   rec["epochs_run"], rec["epochs_to_threshold"],
                   repr(rec["threshold"]), repr(rec["best_smoothed"])]
            if args.study == "sifting":
                row.append(repr(rec["max_abs_g"]))
            writer.writerow(row)

    labels = []
    for rec in rows:
        label = rec["name"]
        if "max_abs_g" in rec:
            label += f" (max|G|={rec['max_abs_g']:.3g})"
        labels.append((label, Path(rec["run_dir"]) / "history.csv"))
    render.history_figure(out / "loss-curves.png", labels,
                          title=f"ablation: {args.study}")

    run_outputs = []
    for rec in rows:
        rel = Path(rec["run_dir"]).relative_to(out)
        run_outputs += [str(rel / "history.csv"), str(rel / CHECKPOINT_NAME)]
    write_manifest(
        out,
        command="ablate",
        argv=args.argv,
        started=started,
        seed=seed,
        seed_source=seed_source,
        config_sha256=sha,
        outputs=["config.json", "summary.csv", "loss-curves.png"] + run_outputs,
        extra={"status": "ok", "study": args.study, "pairs": args.pairs},
    )

    for pair, recs in sorted(by_pair.items()):
        parts = ", ".join(
            f"{r['variant']}: {r['epochs_to_threshold']} epochs" for r in recs
        )
        print(f"pair {pair} (seed {seed + pair}): {parts}")
    print(f"summary: {out / 'summary.csv'}")
    return 0


# ----------------------------------------------------------------------
# app
# ----------------------------------------------------------------------

_TASKS = ("commute", "biharmonic-distance", "cluster", "skin", "inverse")


def _read_points_csv(path, dim_lo: int, dim_hi: int) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"points file {p} does not exist")
    with open(p) as fh:
        first = fh.readline()
    skip = 1 if any(c.isalpha() for c in first) else 0
    try:
        data = np.loadtxt(p, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as exc:
        raise UsageError(f"cannot parse {p}: {exc}") from exc
    if not (dim_lo <= data.shape[1] <= dim_hi):
        raise UsageError(
            f"{p} has {data.shape[1]} columns, expected {dim_lo}..{dim_hi}"
        )
    return data


def _app_points(args, model, seed: int) -> np.ndarray:
    if (args.points is None) == (args.sample is None):
        raise UsageError("provide exactly one of --points or --sample")
    if args.points is not None:
        pts = _read_points_csv(args.points, model.dim, model.dim)
        domain = model.realized_domain(_parse_cond(args.cond).get("z"))
        if not domain.inside(pts).all():
            bad = int(np.argmin(domain.inside(pts)))
            raise UsageError(f"point row {bad} lies outside the domain")
        return pts
    if args.sample < 1:
        raise UsageError("--sample must be positive")
    domain = model.realized_domain(_parse_cond(args.cond).get("z"))
    return domain.sample_interior(args.sample, np.random.default_rng([seed, 31]))


def _parse_transform(text: str, dim: int) -> np.ndarray:
    rows = text.split(";")
    if len(rows) != dim:
        raise UsageError(f"--transform needs {dim} rows separated by ';', got {len(rows)}")
    out = np.empty((dim, dim + 1))
    for i, row in enumerate(rows):
        out[i] = _parse_point(row, dim + 1, "--transform row")
    return out


def cmd_app(args) -> int:
    if args.task not in _TASKS:
        raise UsageError(f"unknown task {args.task!r}; choose from {_TASKS}")
    model = _load_model_file(args.checkpoint)
    cond = _parse_cond(args.cond)
    k, z = cond.get("k"), cond.get("z")
    seed = args.seed
    env = os.environ.get("VGF_SEED")
    seed_source = "flag:--seed"
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise UsageError(f"VGF_SEED must be an integer, got {env!r}") from None
        seed_source = "env:VGF_SEED"

    out = prepare_out_dir(args.out, args.force)
    started = utc_now()
    try:
        outputs, lines = _run_task(args, model, k, z, seed, out)
    except (ModelError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    write_manifest(
        out,
        command="app",
        argv=args.argv,
        started=started,
        seed=seed,
        seed_source=seed_source,
        config_sha256=None,
        outputs=outputs,
        extra={"status": "ok", "task": args.task, "checkpoint": str(args.checkpoint)},
    )
    for line in lines:
        print(line)
    return 0


def _run_task(args, model, k, z, seed, out: Path):
    if args.task in ("commute", "biharmonic-distance"):
        if not args.x or not args.y:
            raise UsageError(f"--task {args.task} needs --x and --y")
        if len(args.x) != len(args.y):
            raise UsageError(f"{len(args.x)} --x values but {len(args.y)} --y values")
        xs = np.stack([_parse_point(t, model.dim, "--x") for t in args.x])
        ys = np.stack([_parse_point(t, model.dim, "--y") for t in args.y])
        fn = apps.commute_distance if args.task == "commute" else apps.biharmonic_distance
        d = fn(model, xs, ys, k=k, z=z)
        with open(out / "distances.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            names = [f"a{i}" for i in range(model.dim)] + [f"b{i}" for i in range(model.dim)]
            writer.writerow(names + ["distance"])
            for a, b, v in zip(xs, ys, d):
                writer.writerow([repr(float(c)) for c in a] + [repr(float(c)) for c in b]
                                + [repr(float(v))])
        lines = [f"{a} -> {b}: {v:.6g}" for a, b, v in zip(xs, ys, d)]
        return ["distances.csv"], lines

    if args.task == "cluster":
        if args.clusters < 1:
            raise UsageError("--clusters must be positive")
        pts = _app_points(args, model, seed)
        result = apps.cluster(model, pts, args.clusters, iters=args.iters,
                              lr=args.lr, seed=seed, k=k, z=z)
        render.write_points_csv(out / "assignments.csv", pts,
                                result.assignment.astype(float), value_name="label")
        render.write_points_csv(out / "centers.csv", result.centers,
                                np.arange(len(result.centers), dtype=float),
                                value_name="label")
        with open(out / "trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss"])
            for i, v in enumerate(result.loss_trace):
                writer.writerow([i, repr(float(v))])
        counts = np.bincount(result.assignment, minlength=args.clusters)
        lines = [f"cluster {j}: {c} points, center {result.centers[j]}"
                 for j, c in enumerate(counts)]
        return ["assignments.csv", "centers.csv", "trace.csv"], lines

    if args.task == "skin":
        if args.source is None or args.transform is None:
            raise UsageError("--task skin needs --source and --transform")
        source = _parse_point(args.source, model.dim, "--source")
        transform = _parse_transform(args.transform, model.dim)
        pts = _app_points(args, model, seed)
        cache = apps.build_weight_cache(model, source, n_samples=args.cache_samples,
                                        seed=seed, k=k, z=z)
        weights = apps.skinning_weight(model, pts, cache, k=k, z=z)
        moved = apps.lbs_displace(pts, weights, transform)
        handle = apps.SkinningHandle(source=source, transform=transform)
        render.write_points_csv(out / "weights.csv", pts, weights, value_name="weight")
        with open(out / "displaced.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            names = [f"x{i}" for i in range(model.dim)] + [f"moved{i}" for i in range(model.dim)]
            writer.writerow(names)
            for a, b in zip(pts, moved):
                writer.writerow([repr(float(c)) for c in a] + [repr(float(c)) for c in b])
        (out / "handle.json").write_text(json.dumps(handle.to_dict(), indent=2) + "\n")
        lines = [f"weights in [{weights.min():.4f}, {weights.max():.4f}] over {len(pts)} points"]
        return ["weights.csv", "displaced.csv", "handle.json"], lines

    # inverse
    if args.observations is None:
        raise UsageError("--task inverse needs --observations (x..., u... columns)")
    if args.init_source is None:
        raise UsageError("--task inverse needs --init-source")
    data = _read_points_csv(args.observations, 2 * model.dim, 2 * model.dim)
    pts, observed = data[:, :model.dim], data[:, model.dim:]
    init_source = _parse_point(args.init_source, model.dim, "--init-source")
    init_transform = (np.zeros((model.dim, model.dim + 1))
                      if args.init_transform is None
                      else _parse_transform(args.init_transform, model.dim))
    fit = apps.inverse_fit(
        model, pts, observed,
        init_source=init_source, init_transform=init_transform,
        iters=args.iters, lr=args.lr, cache_interval=args.cache_interval,
        cache_samples=args.cache_samples, seed=seed, k=k, z=z,
    )
    record = fit.handle.to_dict()
    record["loss"] = fit.loss
    (out / "handle.json").write_text(json.dumps(record, indent=2) + "\n")
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, v in enumerate(fit.loss_trace):
            writer.writerow([i, repr(float(v))])
    lines = [f"recovered source {fit.handle.source}, loss {fit.loss:.6g}"]
    return ["handle.json", "trace.csv"], lines
