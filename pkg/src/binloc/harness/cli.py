"""Command-line entry point: ``binloc <command> [options]``.

Exit codes: 0 success, 2 configuration or input error, 3 missing model.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..adaptation import adapt_background, apply_offset
from ..azimuth_net import band_posteriors
from ..frontend import AudioBuffer, analyze
from ..localizer import grace_match, localise
from ..logmax import localisation_weights, save_weight_mask_csv
from ..sim.scene import SceneSpec, SourceSpec, render_scene
from ..wavio import WavFormatError, read_wav, write_wav
from .config import MODES, ConfigError, dump_config, load_config
from .experiment import ModelStore, db_to_log_energy, oracle_weights, run_experiment
from .reports import bar_chart_svg, emit_reports, read_result_csv, write_weight_mask_svg
from .training import ModelNotFound, build_training_set, load_dataset, make_spatializer, train_dnn, train_source_models, train_ubm

log = logging.getLogger("binloc")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL = 0, 2, 3


def _config(args):
    return load_config(args.config, args.profile, seed=args.seed, models=args.models)


def _out(args, default):
    path = args.out or default
    os.makedirs(path, exist_ok=True)
    return path


def _dataset_path(cfg):
    return os.path.join(cfg.models, "mct.npz")


def cmd_gen_data(args):
    cfg = _config(args)
    ds = build_training_set(cfg)
    path = os.path.join(_out(args, cfg.models), "mct.npz")
    ds.save(path)
    dump_config(cfg, os.path.join(os.path.dirname(path), "config.yaml"))
    print(f"wrote {path} ({sum(f.shape[0] for f in ds.features)} band frames)")


def cmd_train_dnn(args):
    cfg = _config(args)
    path = _dataset_path(cfg)
    dataset = load_dataset(path) if os.path.exists(path) else None
    mlps = train_dnn(cfg, args.jobs, dataset)
    acc = np.mean([m.metadata.get("holdout_accuracy", np.nan) for m in mlps])
    print(f"wrote {cfg.dnn_dir} ({len(mlps)} bands, mean held-out frame accuracy {acc:.3f})")


def cmd_train_gmm(args):
    cfg = _config(args)
    models = train_source_models(cfg, args.jobs)
    print(f"wrote {len(models)} source models to {cfg.gmm_dir}: {', '.join(sorted(models))}")


def cmd_train_ubm(args):
    cfg = _config(args)
    model = train_ubm(cfg, args.jobs)
    print(f"wrote {os.path.join(cfg.gmm_dir, 'ubm.json')} (K={model.n_components})")


def _scene(cfg, args):
    """``(spec, mixture, audio)`` from ``--wav`` (spec and mixture None) or the config's scene section."""
    if args.wav:
        samples, rate = read_wav(args.wav)
        if samples.ndim != 2 or samples.shape[0] != 2:
            raise WavFormatError(f"{args.wav}: need a two-channel file")
        return None, None, AudioBuffer(samples[0], samples[1], rate)
    sc = cfg.scene
    masker = None
    if len(sc.azimuths) == 2 and sc.masker:
        masker = SourceSpec(sc.masker, float(sc.azimuths[1]) % 360, sc.seed + 1)
    try:
        spec = SceneSpec(SourceSpec(sc.target, float(sc.azimuths[0]) % 360, sc.seed), masker, sc.tmr_db,
                         sc.room, sc.seed, sc.duration)
    except ValueError as exc:
        raise ConfigError(f"scene: {exc}") from None
    mixture = render_scene(spec, make_spatializer(cfg), cfg.sample_rate)
    return spec, mixture, mixture.mixture


def _mode_weights(store, mode, mixture, ratemap, target, masker, adapt_iters, adapt_tol):
    if mode == "baseline":
        return np.ones(ratemap.shape), None
    if mode == "oracle":
        if mixture is None:
            raise ConfigError("oracle weights need a synthesised scene, not a WAV file")
        return oracle_weights(mixture), None
    background = store.gmm(masker if mode.startswith("masker") else "ubm")
    tgt = store.gmm(target)
    if not mode.endswith("-adapted"):
        return localisation_weights(ratemap, tgt, background), None
    offset = adapt_background(background, tgt, ratemap, max_iters=adapt_iters, tol=adapt_tol)
    return localisation_weights(ratemap, tgt, background, background_offset=offset.beta), offset


def cmd_localize(args):
    cfg = _config(args)
    store = ModelStore(cfg)
    spec, mixture, audio = _scene(cfg, args)
    out = analyze(audio)
    post = band_posteriors(store.mlps, out.features.stacked())
    n_sources = args.sources or (2 if spec is not None and spec.masker is not None else 1)
    masker = spec.masker.generator if spec is not None and spec.masker is not None else None
    if args.mode.startswith("masker") and masker is None:
        raise ConfigError("masker-model weighting needs a scene with a masker")
    weights, offset = _mode_weights(store, args.mode, mixture, out.ratemap, cfg.scene.target, masker,
                                    cfg.experiment.adapt_max_iters, cfg.experiment.adapt_tol)
    res = localise(post, weights, n_sources=n_sources)
    report = {"mode": args.mode, "estimates": res.estimates}
    if spec is not None:
        grace = grace_match(res.estimates, spec.target.azimuth)
        report.update(target_azimuth=spec.target.azimuth, hit=grace.hit, front_back=grace.front_back)
    if offset is not None:
        report["beta_mean"] = float(np.mean(offset.beta))
    if args.out:
        out_dir = _out(args, args.out)
        save_weight_mask_csv(os.path.join(out_dir, "weights.csv"), weights)
        write_weight_mask_svg(os.path.join(out_dir, "weights.svg"), weights)
        np.savetxt(os.path.join(out_dir, "posterior.csv"), res.posterior[None], delimiter=",", fmt="%.9g",
                   header="# binloc posterior v1\n" + ",".join(f"az{5 * i:03d}" for i in range(res.posterior.size)),
                   comments="")
        if mixture is not None:
            write_wav(os.path.join(out_dir, "scene.wav"), np.stack([audio.left, audio.right]), cfg.sample_rate)
    print(json.dumps(report))


def cmd_evaluate(args):
    cfg = _config(args)
    table, records = run_experiment(cfg, args.jobs)
    out_dir = _out(args, "results")
    paths = emit_reports(table, out_dir, records)
    dump_config(cfg, os.path.join(out_dir, "config.yaml"))
    for row in table.rows:
        print(f"{row.condition}: error {row.error_rate:.3f} front-back {row.front_back_rate:.3f} ({row.trials} trials)")
    print("wrote " + ", ".join(paths))


def cmd_adapt_demo(args):
    """Estimate the background level offset on one scene and export before/after weight masks."""
    cfg = _config(args)
    store = ModelStore(cfg)
    spec, mixture, audio = _scene(cfg, args)
    if spec is None or spec.masker is None:
        raise ConfigError("adapt-demo needs a two-source scene (scene.azimuths with two values)")
    out = analyze(audio)
    tgt = store.gmm(spec.target.generator)
    background = store.gmm(args.background or "ubm")
    if args.mismatch_db:
        background = apply_offset(background, np.full(background.dim, -db_to_log_energy(args.mismatch_db)))
    offset = adapt_background(background, tgt, out.ratemap, max_iters=cfg.experiment.adapt_max_iters,
                              tol=cfg.experiment.adapt_tol)
    before = localisation_weights(out.ratemap, tgt, background)
    after = localisation_weights(out.ratemap, tgt, background, background_offset=offset.beta)
    out_dir = _out(args, "adapt-demo")
    offset.save_csv(os.path.join(out_dir, "beta.csv"))
    for name, w in (("unadapted", before), ("adapted", after)):
        save_weight_mask_csv(os.path.join(out_dir, f"weights_{name}.csv"), w)
        write_weight_mask_svg(os.path.join(out_dir, f"weights_{name}.svg"), w)
    oracle = oracle_weights(mixture)
    save_weight_mask_csv(os.path.join(out_dir, "weights_oracle.csv"), oracle)
    write_weight_mask_svg(os.path.join(out_dir, "weights_oracle.svg"), oracle)
    print(f"beta mean {np.mean(offset.beta):+.3f} after {offset.iterations_run} iterations "
          f"(converged {offset.converged}); wrote {out_dir}")


def cmd_plot(args):
    table = read_result_csv(args.results)
    if not table.rows:
        print("empty table; no chart written")
        return
    path = args.out or os.path.splitext(args.results)[0] + ".svg"
    with open(path, "w") as fh:
        fh.write(bar_chart_svg(table))
    print(f"wrote {path}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config file")
    common.add_argument("--profile", choices=["full", "ci", "tiny"], help="size profile (default: from config, else full)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--models", help="model directory (overrides the config)")
    common.add_argument("--out", help="output path")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="binloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="build the multi-condition training set").set_defaults(func=cmd_gen_data)
    sub.add_parser("train-dnn", parents=[common], help="train the per-band azimuth classifiers").set_defaults(func=cmd_train_dnn)
    sub.add_parser("train-gmm", parents=[common], help="fit target and masker source models").set_defaults(func=cmd_train_gmm)
    sub.add_parser("train-ubm", parents=[common], help="fit the universal background model").set_defaults(func=cmd_train_ubm)
    loc = sub.add_parser("localize", parents=[common], help="localise one scene (config scene or --wav)")
    loc.add_argument("--wav", help="two-channel 16 kHz WAV to localise instead of the config scene")
    loc.add_argument("--mode", choices=MODES, default="baseline")
    loc.add_argument("--sources", type=int, help="number of azimuths to report")
    loc.set_defaults(func=cmd_localize)
    sub.add_parser("evaluate", parents=[common], help="run the experiment grid and write reports").set_defaults(func=cmd_evaluate)
    demo = sub.add_parser("adapt-demo", parents=[common], help="background adaptation on one scene")
    demo.add_argument("--wav", help=argparse.SUPPRESS)
    demo.add_argument("--background", help="background model label (default ubm)")
    demo.add_argument("--mismatch-db", type=float, default=0.0, help="model level error to simulate")
    demo.set_defaults(func=cmd_adapt_demo)
    plot = sub.add_parser("plot", parents=[common], help="render a result CSV as an SVG bar chart")
    plot.add_argument("results", help="result-table CSV")
    plot.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"binloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelNotFound as exc:
        print(f"binloc: missing model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (WavFormatError, FileNotFoundError, ValueError) as exc:
        print(f"binloc: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
