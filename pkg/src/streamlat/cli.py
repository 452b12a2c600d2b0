"""``streamlat`` command-line harness.

Exit codes: 0 success, 1 validation or usage error (including a failed
``--check-ordering``), 2 runtime failure such as training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path


from . import __version__
from .compensation import VARIANTS as COMPENSATION_VARIANTS
from .compensation import CompensationStrategy
from .config import (
    ConfigError,
    config_hash,
    noise_spec,
    resolve,
    scene_config,
    train_config,
)
from .core import Rng
from .eval.metrics import MatchConfig, build_report, summary_csv
from .eval.streaming import EvalConfig, stream_matches
from .experiment import (
    TrainSettings,
    collect_predictions,
    collect_transitions,
    fit_intentions,
    n_classes_of,
    new_alignment_params,
    new_predictor_params,
    train_alignment,
    train_models,
    train_prediction,
)
from .nn import Optimizer, TrainingDivergence, load_checkpoint, save_checkpoint
from .pipeline import ALIGN_VARIANTS, CONTEXT_DIM, PipelineModels, feature_dim
from .prediction import PredictorParams
from .propagation import (
    LinearTeacher,
    MlnParams,
    PropagatorParams,
    load_propagator,
    make_teacher_dataset,
    train_mln,
    train_propagator,
)
from .stream import frames_from_times, parse_latency, schedule_run
from .worldgen import Scene, generate_scene, frame_times

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
TEACHER_TASKS = ("identity", "decay", "linear")


class CheckFailed(Exception):
    pass


class _Stopped(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# shared helpers


def derive_seed(base: int, index: int) -> int:
    return int(Rng(base, 0x6E).child(index).integers(0, 2**31 - 1))


def header_lines(cmd: str, cfg: dict) -> list[str]:
    return [f"streamlat {__version__} {cmd}", f"config_hash={config_hash(cfg)} seed={cfg['seed']}"]


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def out_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {p}: {exc.strerror}") from None
    if not p.is_dir():
        raise ConfigError(f"output path {p} is not a directory")
    return p


def load_scenes(path) -> list[tuple[str, Scene]]:
    d = Path(path)
    if not d.is_dir():
        raise ConfigError(f"scene directory {d} does not exist (generate scenes with `streamlat gen --out {d}`)")
    files = sorted(d.glob("scene_*.json"))
    if not files:
        raise ConfigError(f"scene directory {d} holds no scene_*.json files")
    return [(f.stem, Scene.load(f)) for f in files]


def settings_from(cfg: dict) -> TrainSettings:
    t = cfg["train"]
    st = TrainSettings(noise=noise_spec(cfg), frame_rate=float(cfg["frame_rate"]))
    st.jitter = float(t.get("jitter", st.jitter))
    st.propagator = train_config(t["propagator"], cfg["seed"])
    st.predictor = train_config(t["predictor"], cfg["seed"])
    return st


def strategies_from(cfg: dict, variants) -> list[CompensationStrategy]:
    h = cfg["compensation"].get("fixed_horizon")
    h = parse_latency(cfg["latency"]).mean() if h is None else float(h)
    return [CompensationStrategy(v, h if v == "forecasting" else None) for v in variants]


def schedule_for(scene: Scene, cfg: dict, seed: int, index: int):
    frames = frames_from_times(frame_times(scene.duration, cfg["frame_rate"]))
    return schedule_run(frames, parse_latency(cfg["latency"]), cfg["eval_rate"], Rng(seed, 0x5C4).child(index))


def eval_config(cfg: dict) -> EvalConfig:
    return EvalConfig(noise=noise_spec(cfg), frame_rate=float(cfg["frame_rate"]), match=MatchConfig())


def pmap(fn, jobs: list, n: int) -> list:
    """Ordered map; results never depend on ``n``."""
    if n <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, jobs))


def _eval_job(job):
    scene, cfg, seed, index, models, variants = job
    sched = schedule_for(scene, cfg, seed, index)
    res = stream_matches(scene, sched, models, strategies_from(cfg, variants), eval_config(cfg))
    return sched, res


def load_models(cfg: dict, need_predictor: bool, n_classes: int) -> PipelineModels:
    align = cfg["propagation"]["variant"]
    paths = cfg["models"]
    prop = pred = intents = None
    if align != "none":
        if not paths.get("propagator"):
            raise ConfigError(f"propagation variant {align!r} needs models.propagator (or --models DIR)")
        prop = load_propagator(paths["propagator"])
        kind = "mln" if isinstance(prop, MlnParams) else "ode"
        if kind != align:
            raise ConfigError(f"{paths['propagator']} holds a {kind} model but propagation.variant is {align!r}")
        if prop.dim != CONTEXT_DIM:
            raise ConfigError(f"{paths['propagator']}: embedding dim {prop.dim}, pipeline needs {CONTEXT_DIM}")
    if need_predictor:
        if not paths.get("predictor"):
            raise ConfigError("trajectory compensation needs models.predictor (or --models DIR)")
        pred, intents = PredictorParams.load(paths["predictor"])
        if intents is None:
            raise ConfigError(f"{paths['predictor']} carries no intention points")
        if pred.feature_dim != feature_dim(n_classes):
            raise ConfigError(f"{paths['predictor']}: feature dim {pred.feature_dim}, scenes with {n_classes} "
                              f"classes need {feature_dim(n_classes)}")
    return PipelineModels(align, prop, pred, intents)


# --------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    cfg = resolve(args.config, {"seed": args.seed, "scene.n_agents": args.agents, "scene.duration": args.duration})
    if args.scenes < 1:
        raise ConfigError("--scenes must be >= 1")
    out = out_dir(args.out)
    h = config_hash(cfg)
    manifest = {"config_hash": h, "config": cfg, "scenes": []}
    for i in range(args.scenes):
        s = derive_seed(cfg["seed"], i)
        scene = generate_scene(scene_config(cfg, s))
        d = scene.to_dict()
        d["config_hash"] = h
        name = f"scene_{i:03d}.json"
        write_text(out / name, json.dumps(d, indent=1, sort_keys=True) + "\n")
        manifest["scenes"].append({"file": name, "seed": s, "n_agents": len(scene.agents),
                                   "duration": scene.duration})
    text = json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    write_text(out / "manifest.json", text)
    print(text, end="")
    return EXIT_OK


# --------------------------------------------------------------------------
# train


def _loss_csv(cfg, what, losses) -> str:
    lines = [f"# {l}" for l in header_lines(f"train {what}", cfg)]
    lines.append("step,loss")
    lines += [f"{i},{float(v)!r}" for i, v in enumerate(losses)]
    return "\n".join(lines) + "\n"


def _fit(what, out: Path, cfg, args, arrays, fit):
    """Run ``fit(start_step, optimizer, on_step)`` with checkpoint/resume plumbing."""
    ckpt = out / f"checkpoint_{what}.slpb"
    block = cfg["train"]["propagator" if what == "propagator" else "predictor"]
    opt = Optimizer(block.get("optimizer", "sgd"), float(block["lr"]))
    start, prior = 0, []
    if args.resume:
        if not ckpt.exists():
            raise ConfigError(f"--resume: no checkpoint at {ckpt}")
        start, prior, hyper = load_checkpoint(ckpt, arrays(), opt)
        if hyper.get("config_hash") != config_hash(cfg):
            raise ConfigError(f"{ckpt} was written under a different configuration")
    hist = list(prior)

    def on_step(step, loss, o):
        hist.append(loss)
        done = step + 1
        stop = args.stop_after is not None and done == args.stop_after
        if stop or (args.checkpoint_every and done % args.checkpoint_every == 0):
            save_checkpoint(ckpt, arrays(), o, done, hist, {"config_hash": config_hash(cfg), "what": what})
        if stop:
            raise _Stopped(f"{what}: stopped after step {done}; checkpoint at {ckpt}")

    params, _ = fit(start, opt, on_step)
    write_text(out / f"loss_{what}.csv", _loss_csv(cfg, what, hist))
    return params, hist


def cmd_train(args) -> int:
    over = {"seed": args.seed, "latency": args.latency, "propagation.variant": args.propagation}
    if args.steps is not None:
        over["train.propagator.steps"] = args.steps
        over["train.predictor.steps"] = args.steps
    if args.lr is not None:
        over["train.propagator.lr"] = args.lr
        over["train.predictor.lr"] = args.lr
    cfg = resolve(args.config, over)
    out = out_dir(args.out)
    seed = cfg["seed"]
    latency = parse_latency(cfg["latency"])
    settings = settings_from(cfg)
    align = cfg["propagation"]["variant"]
    try:
        if args.task in TEACHER_TASKS:
            return _train_teacher(args, cfg, out, latency, settings)
        scenes = [s for _, s in load_scenes(args.scenes)] if args.scenes else None
        if scenes is None:
            raise ConfigError("training on scenes needs --scenes DIR")
        prop = None
        if align != "none":
            ppath = out / "propagator.slpb"
            if args.what in ("all", "propagator"):
                data = collect_transitions(scenes, latency, settings, seed)
                params = new_alignment_params(align, settings, seed)
                prop, losses = _fit("propagator", out, cfg, args, params.arrays,
                                    lambda s, o, cb: train_alignment(align, data, settings, seed, params,
                                                                     start_step=s, optimizer=o, on_step=cb))
                prop.save(ppath)
                print(f"propagator ({align}): {len(data)} transitions, final loss {losses[-1]:.6g} -> {ppath}")
            else:
                if not ppath.exists():
                    raise ConfigError(f"predictor training with {align!r} alignment needs {ppath} "
                                      f"(train the propagator first)")
                prop = load_propagator(ppath)
        if args.what in ("all", "predictor"):
            models = PipelineModels(align, prop)
            intents = fit_intentions(scenes, settings, seed)
            ds = collect_predictions(scenes, latency, models, settings, seed)
            params = new_predictor_params(n_classes_of(scenes), settings, seed)
            pred, losses = _fit("predictor", out, cfg, args, params.arrays,
                                lambda s, o, cb: train_prediction(ds, intents, settings, seed, n_classes_of(scenes),
                                                                  params, start_step=s, optimizer=o, on_step=cb))
            pred.save(out / "predictor.slpb", intents)
            print(f"predictor: {len(ds)} samples, final loss {losses[-1]:.6g} -> {out / 'predictor.slpb'}")
    except _Stopped as stop:
        print(stop)
    return EXIT_OK


def _train_teacher(args, cfg, out, latency, settings) -> int:
    seed = cfg["seed"]
    align = cfg["propagation"]["variant"]
    if align == "none":
        raise ConfigError("teacher tasks train a propagator; choose --propagation ode or mln")
    rng = Rng(seed, 0x7E)
    teacher = LinearTeacher.random(args.dim, rng.child(1)) if args.task == "linear" else None
    data = make_teacher_dataset(args.task, args.sequences, 8, args.dim, latency, rng.child(2), noise=args.noise,
                                teacher=teacher)
    if align == "ode":
        params = PropagatorParams.create(args.dim, settings.n_basis, 32, Rng(seed, 0xA1))
        fit = train_propagator
    else:
        params = MlnParams.create(args.dim, 32, Rng(seed, 0xA1))
        fit = train_mln
    tc = settings.propagator
    try:
        params, losses = _fit("propagator", out, cfg, args, params.arrays,
                              lambda s, o, cb: fit(data, params, tc, start_step=s, optimizer=o, on_step=cb))
    except _Stopped as stop:
        print(stop)
        return EXIT_OK
    params.save(out / "propagator.slpb")
    print(f"propagator ({align}) on {args.task} teacher: final loss {losses[-1]:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# run


def _variants(arg, cfg) -> list[str]:
    vs = [v.strip() for v in arg.split(",")] if arg else [cfg["compensation"]["variant"]]
    for v in vs:
        if v not in COMPENSATION_VARIANTS:
            raise ConfigError(f"unknown compensation variant {v!r}; expected one of {COMPENSATION_VARIANTS}")
    return vs


def _models_overrides(args) -> dict:
    over = {}
    if getattr(args, "models", None):
        d = Path(args.models)
        if not d.is_dir():
            raise ConfigError(f"model directory {d} does not exist")
        for name in ("propagator", "predictor"):
            if (d / f"{name}.slpb").exists():
                over[f"models.{name}"] = str(d / f"{name}.slpb")
    return over


def cmd_run(args) -> int:
    over = {"seed": args.seed, "latency": args.latency, "propagation.variant": args.propagation,
            "eval_rate": args.eval_rate, "noise": "none" if args.noise == "none" else None}
    if args.compensation and "," not in args.compensation:
        over["compensation.variant"] = args.compensation
    over.update(_models_overrides(args))
    cfg = resolve(args.config, over)
    variants = _variants(args.compensation, cfg)
    scenes = load_scenes(args.scenes)
    models = load_models(cfg, "trajectory" in variants, n_classes_of([s for _, s in scenes]))
    out = out_dir(args.out)
    jobs = [(sc, cfg, cfg["seed"], i, models, variants) for i, (_, sc) in enumerate(scenes)]
    results = pmap(_eval_job, jobs, args.jobs)

    head = header_lines("run", cfg)
    rows, runs = [], []
    pooled = {v: [] for v in variants}
    for (name, sc), (sched, res) in zip(scenes, results):
        write_text(out / "schedules" / f"{name}.csv", "".join(f"# {l}\n" for l in head) + sched.to_csv())
        for v in variants:
            prov = {"latency_model": sched.latency_desc, "strategy": v, "align": cfg["propagation"]["variant"],
                    "config_hash": config_hash(cfg), "seed": cfg["seed"], "scene": name}
            rep = build_report(res.frames[v], MatchConfig(), None, prov)
            pooled[v] += res.frames[v]
            rows.append(rep.csv_row(name))
            runs.append({"run_id": name, "strategy": v, "n_queries": res.n_queries,
                         "mean_staleness": res.mean_staleness, "report": rep.to_dict()})
    agg = {}
    for v in variants:
        prov = {"latency_model": parse_latency(cfg["latency"]).describe(), "strategy": v,
                "align": cfg["propagation"]["variant"], "config_hash": config_hash(cfg), "seed": cfg["seed"],
                "scene": "all"}
        agg[v] = build_report(pooled[v], MatchConfig(), None, prov).to_dict()
    doc = {"header": head, "config_hash": config_hash(cfg), "config": cfg, "runs": runs, "aggregate": agg}
    write_text(out / "report.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
    write_text(out / "summary.csv", summary_csv(rows, head))
    for v in variants:
        a = agg[v]
        print(f"{v:15s} mAP={a['mAP']:.4f} mATE={a['mATE']:.4f} mASE={a['mASE']:.4f} mAOE={a['mAOE']:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# ablate


def _train_job(job):
    scenes, latency_spec, align, settings, seed = job
    models, _ = train_models(scenes, parse_latency(latency_spec), align, settings, seed)
    return models


def _markdown_table(title, rows) -> str:
    lines = [f"### {title}", "", "| variant | mAP | mATE | mASE | mAOE |", "|---|---|---|---|---|"]
    for name, r in rows:
        lines.append(f"| {name} | {r.mAP:.4f} | {r.mATE:.4f} | {r.mASE:.4f} | {r.mAOE:.4f} |")
    return "\n".join(lines) + "\n"


ALIGN_LABELS = {"none": "no-align", "mln": "mln", "ode": "ode"}


def cmd_ablate(args) -> int:
    over = {"seed": args.seed, "latency": args.latency}
    cfg = resolve(args.config, over)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg["seed"]]
    scenes = load_scenes(args.scenes)
    if args.train_scenes:
        train = [s for _, s in load_scenes(args.train_scenes)]
    else:
        train = [generate_scene(scene_config(cfg, derive_seed(cfg["seed"] + 7919, i))) for i in range(args.n_train)]
    out = out_dir(args.out)
    settings = settings_from(cfg)

    keys = [(s, a) for s in seeds for a in ALIGN_VARIANTS]
    trained = pmap(_train_job, [(train, cfg["latency"], a, settings, s) for s, a in keys], args.jobs)
    models = dict(zip(keys, trained))

    comp_variants = list(COMPENSATION_VARIANTS)
    jobs, tags = [], []
    for s in seeds:
        for a in ALIGN_VARIANTS:
            vs = comp_variants if a == "ode" else ["trajectory"]
            for i, (_, sc) in enumerate(scenes):
                jobs.append((sc, cfg, s, i, models[(s, a)], vs))
                tags.append((s, a))
    results = pmap(_eval_job, jobs, args.jobs)

    align_frames = {a: [] for a in ALIGN_VARIANTS}
    comp_frames = {v: [] for v in comp_variants}
    per_seed = {s: {v: [] for v in comp_variants} for s in seeds}
    for (s, a), (_, res) in zip(tags, results):
        align_frames[a] += res.frames["trajectory"]
        if a == "ode":
            for v in comp_variants:
                comp_frames[v] += res.frames[v]
                per_seed[s][v] += res.frames[v]
    mc = MatchConfig()
    align_rows = [(ALIGN_LABELS[a], build_report(align_frames[a], mc)) for a in ALIGN_VARIANTS]
    comp_rows = [(v, build_report(comp_frames[v], mc)) for v in comp_variants]

    head = header_lines("ablate", cfg) + [f"seeds={','.join(map(str, seeds))} scenes={len(scenes)} "
                                          f"latency={parse_latency(cfg['latency']).describe()}"]
    md = "".join(f"<!-- {l} -->\n" for l in head) + "\n"
    md += _markdown_table("Temporal alignment (trajectory compensation)", align_rows) + "\n"
    md += _markdown_table("Latency compensation (ode alignment)", comp_rows)
    md += ("\nforecasting applies a fixed-horizon velocity offset "
           f"({strategies_from(cfg, ['forecasting'])[0].fixed_horizon:g} s) regardless of the query time.\n")
    lines = [f"# {l}" for l in head] + ["section,variant,mAP,mATE,mASE,mAOE,composite"]
    for section, rows in (("alignment", align_rows), ("compensation", comp_rows)):
        for name, r in rows:
            lines.append(f"{section},{name},{r.mAP:.6f},{r.mATE:.6f},{r.mASE:.6f},{r.mAOE:.6f},{r.composite:.6f}")
    for s in seeds:
        for v in comp_variants:
            r = build_report(per_seed[s][v], mc)
            lines.append(f"seed{s},{v},{r.mAP:.6f},{r.mATE:.6f},{r.mASE:.6f},{r.mAOE:.6f},{r.composite:.6f}")
    write_text(out / "ablation.md", md)
    write_text(out / "ablation.csv", "\n".join(lines) + "\n")
    print(md, end="")
    if args.check_ordering:
        m = {n: r.mAP for n, r in comp_rows}
        if not m["trajectory"] > m["zero_hold"]:
            raise CheckFailed(f"ordering check failed: trajectory mAP {m['trajectory']:.4f} <= "
                              f"zero_hold mAP {m['zero_hold']:.4f}")
        print("ordering check passed: trajectory > zero_hold")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    docs = []
    for p in args.inputs:
        p = Path(p)
        if p.is_dir():
            p = p / "report.json"
        if not p.exists():
            raise ConfigError(f"report {p} not found")
        docs.append((p, json.loads(p.read_text())))
    lines = []
    for p, doc in docs:
        lines.append(f"<!-- source={p} config_hash={doc.get('config_hash', '?')} -->")
        lines.append("")
        lines.append("| run | strategy | mAP | mATE | mASE | mAOE | composite |")
        lines.append("|---|---|---|---|---|---|---|")
        for r in doc["runs"]:
            m = r["report"]
            lines.append(f"| {r['run_id']} | {r['strategy']} | {m['mAP']:.4f} | {m['mATE']:.4f} | "
                         f"{m['mASE']:.4f} | {m['mAOE']:.4f} | {m['composite']:.4f} |")
        for v, m in doc["aggregate"].items():
            lines.append(f"| **all** | {v} | {m['mAP']:.4f} | {m['mATE']:.4f} | {m['mASE']:.4f} | "
                         f"{m['mAOE']:.4f} | {m['composite']:.4f} |")
        lines.append("")
        if doc["aggregate"]:
            first = next(iter(doc["aggregate"].values()))
            lines.append(f"composite = {first['composite_formula']}")
            lines.append("")
    text = "\n".join(lines)
    if args.out:
        write_text(Path(args.out), text)
    print(text, end="")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--seed", type=int, help="overrides STREAMLAT_SEED and the config seed")

    p = _Parser(prog="streamlat", description="Latency-aware streaming perception benchmark")
    p.add_argument("--version", action="version", version=f"streamlat {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate scenes")
    g.add_argument("--scenes", type=int, default=10)
    g.add_argument("--agents", type=int)
    g.add_argument("--duration", type=float)
    g.add_argument("--out", default="scenes")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", parents=[common], help="train propagator and/or predictor")
    t.add_argument("--scenes", help="directory of scene_*.json (scene task)")
    t.add_argument("--task", choices=("scenes",) + TEACHER_TASKS, default="scenes")
    t.add_argument("--what", choices=("all", "propagator", "predictor"), default="all")
    t.add_argument("--propagation", choices=ALIGN_VARIANTS)
    t.add_argument("--latency")
    t.add_argument("--steps", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--dim", type=int, default=16, help="embedding dim for teacher tasks")
    t.add_argument("--sequences", type=int, default=200, help="teacher sequences")
    t.add_argument("--noise", type=float, default=0.05, help="teacher target noise std")
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.add_argument("--stop-after", type=int, help="save a checkpoint and stop after this many steps")
    t.add_argument("--resume", action="store_true")
    t.add_argument("--out", default="models")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", parents=[common], help="streaming evaluation")
    r.add_argument("--scenes", required=True)
    r.add_argument("--models")
    r.add_argument("--latency")
    r.add_argument("--compensation", help="variant or comma-separated list")
    r.add_argument("--propagation", choices=ALIGN_VARIANTS)
    r.add_argument("--noise", choices=("none", "config"), default="config")
    r.add_argument("--eval-rate", type=float)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default="run")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("ablate", parents=[common], help="alignment and compensation ablations")
    a.add_argument("--scenes", required=True)
    a.add_argument("--train-scenes")
    a.add_argument("--n-train", type=int, default=10)
    a.add_argument("--seeds", help="comma-separated training/schedule seeds")
    a.add_argument("--latency")
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--check-ordering", action="store_true")
    a.add_argument("--out", default="ablation")
    a.set_defaults(func=cmd_ablate)

    rep = sub.add_parser("report", help="summarize run reports as Markdown")
    rep.add_argument("inputs", nargs="+", help="report.json files or run directories")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("streamlat: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except TrainingDivergence as exc:
        print(f"streamlat: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CheckFailed as exc:
        print(f"streamlat: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"streamlat: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surface any runtime failure as exit 2
        print(f"streamlat: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
