"""Command-line pipeline: gen, simulate, fit, train, eval, svd, ablate.

One JSON config drives every stage; artifacts embed the resolved config hash
and seed. Exit codes: 0 success, 2 usage/config errors, 3 runtime/numeric
failures.
"""

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .containers import read_checkpoint, read_tensor, write_json, write_tensor
from .datagen import build_dataset, gen_velocity_map, load_dataset
from .decoder import DecoderConfig
from .errors import ConfigError, NumericError
from .linmap import (
    fit_ridge,
    load_linear_map,
    regression_report,
    save_linear_map,
    svd_spectrum,
    write_spectrum_csv,
)
from .metrics import count_flops, count_params, evaluate_maps
from .pipeline import decode_maps, decoder_inputs, embedding_targets
from .training import train_decoder
from .transforms import PHI_FAMILIES, PSI_FAMILIES, PhiSpec, embed_properties, encode_measurements
from .wavesim import VelocityMap, simulate_gather

ABLATION_PHI_FAMILIES = tuple(f for f in PHI_FAMILIES if f != "identity_skip")
ABLATION_PSI_FAMILIES = PSI_FAMILIES


def _write_csv(path, header, rows, meta_line=None):
    with open(path, "w", newline="") as fh:
        if meta_line:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _meta_line(cfg, seed):
    return f"config_hash={cfg.hash()} seed={seed}"


def _resolved_config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.training = replace(cfg.training, seed=cfg.seed)
    if args.deterministic:
        cfg.training = replace(cfg.training, deterministic=True)
    return cfg


def _dataset_embeddings(ds, cfg):
    """Measurement and property embeddings for every sample in the dataset."""
    u = encode_measurements(ds.normalized_seismic(), cfg.encoder)
    targets = embedding_targets(ds.velocity, ds.velocity_bounds, cfg.embedding.target)
    y = embed_properties(targets, cfg.embedding.psi_spec())
    return u, y


def cmd_gen(args):
    cfg = _resolved_config(args)
    ds = build_dataset(
        cfg.seed,
        cfg.dataset.n_samples,
        cfg.dataset.map_spec(),
        cfg.acquisition,
        out_dir=args.out,
        split=cfg.dataset.resolved_split(),
        threads=args.threads,
        extra_meta={"config_hash": cfg.hash()},
    )
    print(f"wrote dataset: {args.out} ({ds.manifest['n_samples']} samples, "
          f"seismic {tuple(ds.seismic.shape)})")
    return 0


def cmd_simulate(args):
    cfg = _resolved_config(args)
    map_spec = cfg.dataset.map_spec()
    if args.map is not None:
        grid = read_tensor(args.map)
        v = VelocityMap(grid=grid, dx=map_spec.dx, dz=map_spec.dz)
    else:
        seed = args.map_seed if args.map_seed is not None else cfg.seed
        v = gen_velocity_map(seed, map_spec)
    acq = cfg.acquisition
    gather = simulate_gather(v, acq.sources(v.shape[1]), acq.receivers(v.shape[1]),
                             acq.sim_config(map_spec))
    out = Path(args.out)
    write_tensor(out, gather.traces)
    write_json(out.with_suffix(".json"), {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "dt": gather.dt,
        "shape": list(gather.traces.shape),
    })
    print(f"wrote gather: {out} shape {tuple(gather.traces.shape)}")
    return 0


def cmd_fit(args):
    cfg = _resolved_config(args)
    ds = load_dataset(args.data)
    u, y = _dataset_embeddings(ds, cfg)
    train_idx = ds.split_indices("train")
    test_idx = ds.split_indices("test")

    lm = fit_ridge(u[train_idx], y[train_idx], alpha=cfg.ridge.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec_hashes = {
        "phi_spec": vars(cfg.encoder),
        "psi_spec": {**vars(cfg.embedding.psi_spec()),
                     "center_grid": list(cfg.embedding.psi_spec().center_grid or ())},
        "target": cfg.embedding.target,
    }
    save_linear_map(out, lm, meta={"config_hash": cfg.hash(), "seed": cfg.seed, "specs": spec_hashes})
    write_tensor(out / "embeddings_u.invt", u)
    write_tensor(out / "embeddings_y.invt", y)
    write_json(out / "embeddings.json",
               {"config_hash": cfg.hash(), "seed": cfg.seed, "specs": spec_hashes,
                "dims": {"u": list(u.shape), "y": list(y.shape)}})

    rows = []
    for split, idx in (("train", train_idx), ("test", test_idx)):
        if idx.size == 0:
            continue
        rep = regression_report(lm, u[idx], y[idx])
        rows.append([split, f"{rep['mae']:.10g}", f"{rep['mse']:.10g}",
                     f"{rep['y_range']:.10g}", f"{rep['y_mean_abs']:.10g}"])
    _write_csv(out / "regression_report.csv",
               ["split", "mae", "mse", "y_range", "y_mean_abs"], rows,
               meta_line=_meta_line(cfg, cfg.seed))
    print(f"fitted linear map {lm.A.shape} (alpha={lm.alpha}); report in {out}")
    return 0


def _load_fit_artifacts(fit_dir):
    fit_dir = Path(fit_dir)
    lm, lm_meta = load_linear_map(fit_dir)
    u = read_tensor(fit_dir / "embeddings_u.invt").astype(np.float64)
    y = read_tensor(fit_dir / "embeddings_y.invt").astype(np.float64)
    return lm, lm_meta, u, y


def _decoder_config(cfg, ds):
    h, w = ds.velocity.shape[1:]
    d = cfg.decoder
    return DecoderConfig(m_in=cfg.embedding.m_kernels, out_h=h, out_w=w, k=d.k,
                         heads=d.heads, mlp_ratio=d.mlp_ratio, depth=d.depth,
                         overlap=d.overlap, shared_head=d.shared_head)


def cmd_train(args):
    cfg = _resolved_config(args)
    ds = load_dataset(args.data)
    lm, _, u, y = _load_fit_artifacts(args.fit)
    inputs = decoder_inputs(lm, u, y, cfg.use_true_embedding)
    targets = ds.normalized_velocity()

    train_idx = ds.split_indices("train")
    val_idx = ds.split_indices("val")
    dec_cfg = _decoder_config(cfg, ds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train_decoder(
        inputs[train_idx], targets[train_idx], inputs[val_idx], targets[val_idx],
        dec_cfg, cfg.training, out_dir=out,
        ckpt_meta={"config_hash": cfg.hash(), "seed": cfg.seed},
    )
    write_json(out / "train_meta.json", {
        "config_hash": cfg.hash(), "seed": cfg.seed,
        "best_epoch": result.best_epoch,
        "best_val_mae": result.best_val_mae,
        "epochs_run": len(result.history),
    })
    print(f"trained decoder: best val MAE {result.best_val_mae:.6f} "
          f"at epoch {result.best_epoch}; checkpoint in {out / 'checkpoint'}")
    return 0


def cmd_eval(args):
    cfg = _resolved_config(args)
    ds = load_dataset(args.data)
    lm, _, u, _ = _load_fit_artifacts(args.fit)
    params, _ = read_checkpoint(Path(args.ckpt) / "checkpoint"
                                if (Path(args.ckpt) / "checkpoint").exists() else args.ckpt)
    dec_cfg = _decoder_config(cfg, ds)
    test_idx = ds.split_indices("test")

    y_hat = lm.A.astype(np.float64) @ u[test_idx].T
    maps = decode_maps(params, dec_cfg, y_hat.T)
    targets = ds.normalized_velocity(test_idx)
    summary, rows = evaluate_maps(maps, targets, ds.velocity_bounds)

    p = cfg.embedding.m_kernels, u.shape[1]
    summary["n_params"] = count_params(dec_cfg, encoder_dims=(p[1], p[0]))
    summary["flops"] = count_flops(dec_cfg, encoder_dims=(p[1], p[0]))
    summary["config_hash"] = cfg.hash()
    summary["seed"] = cfg.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "eval_report.json", summary)
    _write_csv(out / "eval_report.csv", ["index", "mae", "mse", "ssim"],
               [[r["index"], f"{r['mae']:.10g}", f"{r['mse']:.10g}", f"{r['ssim']:.10g}"] for r in rows],
               meta_line=_meta_line(cfg, cfg.seed))
    print(f"eval: MAE {summary['mae']:.3f} m/s, MSE {summary['mse']:.1f}, SSIM {summary['ssim']:.4f}")
    return 0


def cmd_svd(args):
    cfg = _resolved_config(args)
    lm, _ = load_linear_map(args.fit)
    spectrum = svd_spectrum(lm, truncate=args.truncate)
    write_spectrum_csv(args.out, spectrum, header_comment=_meta_line(cfg, cfg.seed))
    print(f"wrote {len(spectrum)} normalized singular values to {args.out}")
    return 0


def _run_variant(ds, cfg, dec_cfg, train_idx, val_idx, test_idx):
    """Fit + train + evaluate one kernel configuration; returns summary metrics."""
    u, y = _dataset_embeddings(ds, cfg)
    lm = fit_ridge(u[train_idx], y[train_idx], alpha=cfg.ridge.alpha)
    inputs = decoder_inputs(lm, u, y, cfg.use_true_embedding)
    targets = ds.normalized_velocity()
    result = train_decoder(inputs[train_idx], targets[train_idx],
                           inputs[val_idx], targets[val_idx], dec_cfg, cfg.training)
    maps = decode_maps(result.params, dec_cfg, inputs[test_idx])
    summary, _ = evaluate_maps(maps, targets[test_idx], ds.velocity_bounds)
    return summary


def cmd_ablate(args):
    cfg = _resolved_config(args)
    ds = load_dataset(args.data)
    train_idx = ds.split_indices("train")
    val_idx = ds.split_indices("val")
    test_idx = ds.split_indices("test")
    dec_cfg = _decoder_config(cfg, ds)

    rows = []
    for family in ABLATION_PHI_FAMILIES:
        variant = replace(cfg, encoder=PhiSpec(family=family, n_kernels=cfg.encoder.n_kernels))
        summary = _run_variant(ds, variant, dec_cfg, train_idx, val_idx, test_idx)
        rows.append(["encoder", family, f"{summary['mae']:.10g}",
                     f"{summary['mse']:.10g}", f"{summary['ssim']:.10g}"])
        print(f"ablate encoder kernel {family}: MAE {summary['mae']:.3f}")
    for family in ABLATION_PSI_FAMILIES:
        emb = replace(cfg.embedding, family=family, center_grid=None)
        variant = replace(cfg, embedding=emb)
        summary = _run_variant(ds, variant, dec_cfg, train_idx, val_idx, test_idx)
        rows.append(["decoder", family, f"{summary['mae']:.10g}",
                     f"{summary['mse']:.10g}", f"{summary['ssim']:.10g}"])
        print(f"ablate decoder kernel {family}: MAE {summary['mae']:.3f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "ablation.csv", ["sweep", "kernel", "mae", "mse", "ssim"], rows,
               meta_line=_meta_line(cfg, cfg.seed))
    print(f"wrote {len(rows)} ablation rows to {out / 'ablation.csv'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lininv", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lininv {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--threads", type=int, default=1, help="simulation worker cap")
    common.add_argument("--deterministic", action="store_true",
                        help="bit-reproducible artifacts (64-bit training math)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate and simulate a dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", parents=[common], help="forward-simulate one gather")
    p.add_argument("--map", default=None, help="velocity map INVT file (H x W)")
    p.add_argument("--map-seed", type=int, default=None, help="generate the map from this seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="embed dataset and fit the linear map")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("train", parents=[common], help="train the decoder")
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate on the test split")
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("svd", parents=[common], help="normalized singular-value spectrum")
    p.add_argument("--fit", required=True)
    p.add_argument("--truncate", type=int, default=150)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_svd)

    p = sub.add_parser("ablate", parents=[common], help="sweep encoder and decoder kernels")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
