"""Command-line interface: train, impute, benchmark, ablate.

Every run resolves its options into a flat key = value config text, writes
that text next to its outputs, and stamps each emitted CSV with the package
version, the run seed, and the sha256 of the resolved config, so a rerun
with the same inputs reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BASELINE_KINDS, BaselineError, baseline_impute
from .bench import MaskSpec, downstream_eval, ensemble_eval, rank_table, summarize
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    CsvFormatError,
    MinMaxScaler,
    gen_mar_mask,
    gen_mcar_mask,
    load_csv,
    read_mask_csv,
    split,
    write_csv,
)
from .denoisers import ARCHITECTURES, DenoiserConfig, build_denoiser
from .rng import derive_seed
from .sampling import MaskedTable, SamplerOptions, build_plan, impute
from .schedule import build_cosine_schedule
from .tensor import NumericError
from .training import TrainingConfig, TrainingDiverged, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 4

_MASK_STREAM = 1  # substream indices of the run seed
_SAMPLE_STREAM = 2

TAU_SWEEP = (10, 25, 50, 100, 250, 500)


class UsageError(ValueError):
    pass


# -- resolved-config plumbing ---------------------------------------------------


def format_config(section: str, values: dict) -> str:
    lines = [f"[{section}]"]
    for key in sorted(values):
        lines.append(f"{key} = {values[key]}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> dict[str, dict[str, str]]:
    """Parse the flat key = value format with [section] headers."""
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], {})
            continue
        if "=" not in line or current is None:
            raise UsageError(f"config line {i}: expected 'key = value' inside a section")
        key, _, value = line.partition("=")
        current[key.strip()] = value.strip()
    return sections


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def header_comments(seed: int, cfg_text: str) -> list[str]:
    return [
        f"tabdiffuse-version: {__version__}",
        f"seed: {seed}",
        f"config-sha256: {config_hash(cfg_text)}",
    ]


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def text_table(col_names: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(c)), *(len(r[i]) for r in rows)) for i, c in enumerate(col_names)]
    def line(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths))
    out = [line(col_names), line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


# -- shared argument handling ------------------------------------------------------


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser,
                       command: str) -> None:
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    sections = parse_config(path.read_text(encoding="utf-8"))
    unknown_sections = set(sections) - set(COMMANDS)
    if unknown_sections:
        raise UsageError(f"unknown config section(s): {sorted(unknown_sections)}")
    overrides = sections.get(command, {})
    known = set(vars(args))
    sub = parser.command_parsers[command]
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown config key [{command}] {key}")
        default = sub.get_default(dest)
        if getattr(args, dest) == default:  # flags given on the CLI win
            setattr(args, dest, value)


def _int(v) -> int:
    return int(v)


def _float(v) -> float:
    return float(v)


def _opt_int(v):
    return None if v in (None, "", "none") else int(v)


# -- train ------------------------------------------------------------------------


def cmd_train(args, parser) -> int:
    data_path = Path(args.data)
    if not data_path.exists():
        raise UsageError(f"data file not found: {data_path}")
    ds = load_csv(data_path, target_column=args.target)
    scaler = MinMaxScaler().fit(ds.features)
    scaled = scaler.transform(ds.features)

    den_cfg = DenoiserConfig(
        arch=args.arch,
        n_features=ds.n_features,
        blocks=_int(args.blocks),
        hidden=_opt_int(args.hidden),
        embed_dim=_int(args.embed_dim),
        heads=_int(args.heads),
        unet_channels=tuple(int(c) for c in str(args.unet_channels).split(",")),
        time_embedding=not args.no_time_embedding,
        dtype=args.dtype,
    )
    tr_cfg = TrainingConfig(
        epochs=_int(args.epochs),
        batch_size=_int(args.batch_size),
        t_training=_int(args.T),
        lr=_float(args.lr),
        weight_decay=_float(args.weight_decay),
        beta_l1=_float(args.beta_l1),
        seed=_int(args.seed),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = format_config("train", {
        "data": data_path, "target": args.target or "", "arch": args.arch,
        "epochs": tr_cfg.epochs, "batch_size": tr_cfg.batch_size, "T": tr_cfg.t_training,
        "lr": tr_cfg.lr, "weight_decay": tr_cfg.weight_decay, "beta_l1": tr_cfg.beta_l1,
        "seed": tr_cfg.seed, "blocks": den_cfg.blocks, "hidden": den_cfg.hidden or "",
        "embed_dim": den_cfg.embed_dim, "heads": den_cfg.heads,
        "unet_channels": ",".join(map(str, den_cfg.unet_channels)),
        "time_embedding": den_cfg.time_embedding, "dtype": den_cfg.dtype,
        "checkpoint_every": args.checkpoint_every or "",
    })
    _write_text(out_dir / "run_config.txt", resolved)

    denoiser = build_denoiser(den_cfg, seed=tr_cfg.seed)

    def maybe_checkpoint(epoch, losses):
        every = _opt_int(args.checkpoint_every)
        if every and (epoch + 1) % every == 0:
            save_checkpoint(out_dir / f"epoch_{epoch + 1:04d}.ckpt", denoiser,
                            train_t=tr_cfg.t_training, scaler=scaler,
                            feature_names=ds.feature_names)

    t0 = time.perf_counter()
    history = train(denoiser, scaled, tr_cfg, on_epoch_end=maybe_checkpoint)
    _log(f"[train] {tr_cfg.epochs} epochs in {time.perf_counter() - t0:.2f}s, "
         f"final loss {history[-1]:.6f}")

    save_checkpoint(out_dir / "checkpoint.ckpt", denoiser, train_t=tr_cfg.t_training,
                    scaler=scaler, feature_names=ds.feature_names,
                    meta={"seed": tr_cfg.seed})
    comments = header_comments(tr_cfg.seed, resolved)
    loss_rows = np.array([[e + 1, loss] for e, loss in enumerate(history)])
    write_csv(out_dir / "loss.csv", loss_rows, ["epoch", "mean_loss"],
              header_comments=comments)
    _log(f"[train] wrote {out_dir / 'checkpoint.ckpt'}")
    return EXIT_OK


# -- impute -----------------------------------------------------------------------


def _make_mask(args, n_rows: int, n_cols: int, seed: int) -> np.ndarray:
    chosen = [x for x in (args.mask, args.mcar, args.mar) if x not in (None, "")]
    if len(chosen) != 1:
        raise UsageError("choose exactly one of --mask / --mcar / --mar")
    if args.mask:
        mask_path = Path(args.mask)
        if not mask_path.exists():
            raise UsageError(f"mask file not found: {mask_path}")
        mask = read_mask_csv(mask_path)
        if mask.shape != (n_rows, n_cols):
            raise UsageError(f"mask shape {mask.shape} does not match data ({n_rows}, {n_cols})")
        return mask
    if args.mcar is not None:
        return gen_mcar_mask(n_rows, n_cols, _float(args.mcar), derive_seed(seed, _MASK_STREAM))
    return gen_mar_mask(n_rows, n_cols, _int(args.mar), derive_seed(seed, _MASK_STREAM))


def cmd_impute(args, parser) -> int:
    ckpt_path, data_path = Path(args.checkpoint), Path(args.data)
    if not ckpt_path.exists():
        raise UsageError(f"checkpoint not found: {ckpt_path}")
    if not data_path.exists():
        raise UsageError(f"data file not found: {data_path}")
    denoiser, train_t, scaler, _, _ = load_checkpoint(ckpt_path)
    ds = load_csv(data_path, target_column=args.target)
    if ds.n_features != denoiser.config.n_features:
        raise UsageError(
            f"data has {ds.n_features} features, checkpoint expects "
            f"{denoiser.config.n_features}"
        )
    seed = _int(args.seed)
    mask = _make_mask(args, ds.n_rows, ds.n_features, seed)
    opts = SamplerOptions(
        t_sampling=_int(args.T_sampling),
        tau=_opt_int(args.tau),
        skip_type=args.skip_type,
        eta=_float(args.eta),
        jump_length=_int(args.jump_length),
        jump_n_sample=_int(args.jump_n_sample),
        n_inferences=_int(args.n_inferences),
        seed=derive_seed(seed, _SAMPLE_STREAM),
    )
    resolved = format_config("impute", {
        "checkpoint": ckpt_path, "data": data_path, "mask": args.mask or "",
        "mcar": args.mcar or "", "mar": args.mar or "", "T_sampling": opts.t_sampling,
        "tau": opts.tau or "", "skip_type": opts.skip_type, "eta": opts.eta,
        "jump_length": opts.jump_length, "jump_n_sample": opts.jump_n_sample,
        "n_inferences": opts.n_inferences, "seed": seed, "target": args.target or "",
    })

    sched = build_cosine_schedule(opts.t_sampling)
    scaled = scaler.transform(ds.features) if scaler is not None else ds.features
    table = MaskedTable(scaled, mask)
    t0 = time.perf_counter()
    out_scaled = impute(denoiser, table, opts, sched=sched, train_t=train_t)
    elapsed = time.perf_counter() - t0
    plan_len = len(build_plan(sched, opts))
    _log(f"[impute] plan steps: {plan_len - 1}, inferences: {opts.n_inferences}, "
         f"wall time: {elapsed:.3f}s")

    out = scaler.inverse_transform(out_scaled) if scaler is not None else out_scaled
    out[mask] = ds.features[mask]  # observations pass through verbatim
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out_path, out, ds.feature_names,
              header_comments=header_comments(seed, resolved))
    _write_text(out_path.with_name(out_path.name + ".config.txt"), resolved)
    _log(f"[impute] wrote {out_path}")
    return EXIT_OK


# -- benchmark ----------------------------------------------------------------------


def _parse_grid(tokens: list[str]) -> list[MaskSpec]:
    specs: list[MaskSpec] = []
    for token in tokens:
        if "=" not in token:
            raise UsageError(f"grid token {token!r} must look like mcar=10..90 or mar=1..4")
        name, _, values = token.partition("=")
        name = name.strip().lower()
        if ".." in values:
            lo, _, hi = values.partition("..")
            step = 10 if name == "mcar" else 1
            points = list(range(int(lo), int(hi) + 1, step))
        else:
            points = [float(v) for v in values.split(",")]
        for p in points:
            if name == "mcar":
                frac = p / 100.0 if p > 1 else float(p)
                specs.append(MaskSpec("mcar", p_random=frac))
            elif name == "mar":
                specs.append(MaskSpec("mar", p_col=int(p)))
            else:
                raise UsageError(f"unknown grid mechanism {name!r}")
    if not specs:
        raise UsageError("empty mask grid")
    return specs


def _diffusion_impute_fn(denoiser, train_t, ckpt_scaler, bench_scaler, opts_base):
    """Adapter: one inference in the checkpoint's model space, scored in
    the benchmark's common scaled space."""

    def fn(x_obs, mask, seed):
        raw = bench_scaler.inverse_transform(x_obs)
        model_space = ckpt_scaler.transform(raw) if ckpt_scaler is not None else raw
        table = MaskedTable(np.where(mask, model_space, 0.0), mask)
        opts = SamplerOptions(**{**opts_base, "n_inferences": 1, "seed": seed})
        out = impute(denoiser, table, opts, train_t=train_t)
        back = ckpt_scaler.inverse_transform(out) if ckpt_scaler is not None else out
        return bench_scaler.transform(back)

    return fn


def cmd_benchmark(args, parser) -> int:
    if isinstance(args.grid, str):  # config-file form
        args.grid = args.grid.split()
    if isinstance(args.checkpoint, str):
        args.checkpoint = args.checkpoint.split(";")
    data_path = Path(args.data)
    if not data_path.exists():
        raise UsageError(f"data file not found: {data_path}")
    ds = load_csv(data_path, target_column=args.target)
    seed = _int(args.seed)
    train_ds, test_ds = split(ds, fraction=_float(args.split_fraction), seed=seed)
    bench_scaler = MinMaxScaler().fit(train_ds.features)
    train_scaled = bench_scaler.transform(train_ds.features)
    test_scaled = bench_scaler.transform(test_ds.features)

    methods = [m.strip() for m in args.methods.split(",")] if args.methods else list(BASELINE_KINDS)
    specs = _parse_grid(args.grid)

    checkpoints = {}
    for path_str in args.checkpoint or []:
        denoiser, train_t, ck_scaler, _, _ = load_checkpoint(Path(path_str))
        checkpoints[f"diffusion-{denoiser.config.arch}"] = (denoiser, train_t, ck_scaler)

    impute_fns = {}
    for method in methods:
        if method in BASELINE_KINDS:
            def fn(x_obs, mask, seed, _kind=method):
                return baseline_impute(_kind, x_obs, mask, train_scaled)
            impute_fns[method] = (fn, 1)
        elif method in checkpoints:
            denoiser, train_t, ck_scaler = checkpoints[method]
            opts_base = dict(
                t_sampling=_int(args.T_sampling), tau=_opt_int(args.tau),
                eta=_float(args.eta), jump_length=_int(args.jump_length),
                jump_n_sample=_int(args.jump_n_sample),
            )
            impute_fns[method] = (
                _diffusion_impute_fn(denoiser, train_t, ck_scaler, bench_scaler, opts_base),
                _int(args.n_inferences),
            )
        else:
            raise UsageError(
                f"method {method!r} is not a baseline and no checkpoint provides it "
                f"(available: {sorted(checkpoints) or 'none'})"
            )

    resolved = format_config("benchmark", {
        "data": data_path, "methods": ",".join(methods),
        "grid": " ".join(args.grid), "seed": seed,
        "split_fraction": args.split_fraction, "n_mask_seeds": args.n_mask_seeds,
        "n_inferences": args.n_inferences, "T_sampling": args.T_sampling,
        "tau": args.tau or "", "jobs": args.jobs, "target": args.target or "",
        "report_space": args.report_space,
        "checkpoints": ";".join(args.checkpoint or []),
    })
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(out_dir / "run_config.txt", resolved)
    comments = header_comments(seed, resolved)

    cells = [(method, spec) for method in methods for spec in specs]
    imputations: dict = {}

    score_transform = bench_scaler.inverse_transform if args.report_space == "raw" else None

    def run_cell(cell):
        # undefined combinations (e.g. next-value fill on whole-column masks)
        # become "/" cells instead of aborting the sweep
        method, spec = cell
        fn, n_inf = impute_fns[method]
        try:
            return ensemble_eval(fn, method, test_scaled, spec,
                                 n_mask_seeds=_int(args.n_mask_seeds),
                                 n_inferences=n_inf,
                                 base_seed=derive_seed(seed, _MASK_STREAM),
                                 imputation_sink=imputations,
                                 score_transform=score_transform)
        except BaselineError as err:
            _log(f"[benchmark] {method} undefined for {spec.label}: {err}")
            return []

    jobs = _int(args.jobs)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]
    rows = [r for cell_rows in results for r in cell_rows]

    row_values = [
        [r.method, r.setting, r.mask_seed, _fmt(r.mse),
         "" if r.pearson is None else _fmt(r.pearson)]
        for r in rows
    ]
    _write_rows_csv(out_dir / "rows.csv", ["method", "setting", "mask_seed", "mse", "pearson"],
                    row_values, comments)

    summary = summarize(rows)
    settings = [s.label for s in specs]
    matrix_rows = [
        [m] + [_fmt(summary[s][m]) if m in summary.get(s, {}) else "/" for s in settings]
        for m in methods
    ]
    _write_rows_csv(out_dir / "summary.csv", ["method"] + settings, matrix_rows, comments)
    rankable = [m for m in methods if all(m in summary.get(s, {}) for s in settings)]
    ranks = rank_table({s: {m: summary[s][m] for m in rankable} for s in settings})
    _write_rows_csv(out_dir / "ranks.csv", ["method", "mean", "std"],
                    [[m, _fmt(mean), _fmt(std)] for m, mean, std in ranks], comments)
    table_txt = text_table(["method"] + settings, matrix_rows)
    rank_txt = text_table(["method", "mean", "std"],
                          [[m, _fmt(mean), _fmt(std)] for m, mean, std in ranks])
    banner = "".join(f"# {c}\n" for c in comments)
    _write_text(out_dir / "summary.txt", banner + table_txt + "\n" + rank_txt)

    # downstream task on the first mask seed's imputations, when labels exist
    if ds.target is not None:
        down_rows = []
        metric_name = "rmse" if ds.task == "regression" else "accuracy"
        complete = downstream_eval(train_scaled, train_ds.target, test_scaled,
                                   test_ds.target, ds.task, seed=seed)
        down_rows.append(["complete"] + [_fmt(complete)] * len(settings))
        for m in methods:
            vals = []
            for s in settings:
                if (m, s) not in imputations:
                    vals.append("/")
                    continue
                metric = downstream_eval(train_scaled, train_ds.target,
                                         imputations[(m, s)], test_ds.target,
                                         ds.task, seed=seed)
                vals.append(_fmt(metric))
            down_rows.append([m] + vals)
        _write_rows_csv(out_dir / f"downstream_{metric_name}.csv",
                        ["method"] + settings, down_rows, comments)

    _log(f"[benchmark] {len(rows)} result rows -> {out_dir}")
    return EXIT_OK


def _write_rows_csv(path: Path, header: list[str], rows: list[list], comments: list[str]) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    lines += [",".join(str(c) for c in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


# -- ablate ------------------------------------------------------------------------


def _ablate_mse(denoiser, train_t, ckpt_scaler, test_features, opts_base, mcar_p, n_mask_seeds,
                n_inferences, base_seed):
    """Mean over mask seeds of the MSE of the n-inference average, in the
    checkpoint's scaled space."""
    scaled = ckpt_scaler.transform(test_features) if ckpt_scaler is not None else test_features
    per_seed = []
    for s in range(n_mask_seeds):
        mask_seed = derive_seed(base_seed, s)
        mask = gen_mcar_mask(*scaled.shape, mcar_p, mask_seed)
        table = MaskedTable(np.where(mask, scaled, 0.0), mask)
        acc = np.zeros_like(scaled)
        for i in range(n_inferences):
            opts = SamplerOptions(**{**opts_base, "n_inferences": 1,
                                     "seed": derive_seed(mask_seed, i)})
            acc += impute(denoiser, table, opts, train_t=train_t)
        avg = acc / n_inferences
        d = scaled[~mask] - avg[~mask]
        per_seed.append(float(np.mean(d * d)))
    return float(np.mean(per_seed)), per_seed


def cmd_ablate(args, parser) -> int:
    ckpt_path, data_path = Path(args.checkpoint), Path(args.data)
    if not ckpt_path.exists():
        raise UsageError(f"checkpoint not found: {ckpt_path}")
    if not data_path.exists():
        raise UsageError(f"data file not found: {data_path}")
    denoiser, train_t, ck_scaler, _, _ = load_checkpoint(ckpt_path)
    arch = denoiser.config.arch
    ds = load_csv(data_path, target_column=args.target)
    seed = _int(args.seed)
    _, test_ds = split(ds, fraction=_float(args.split_fraction), seed=seed)
    mcar_p = _float(args.mcar)
    t_sampling = _int(args.T_sampling)
    n_seeds, n_inf = _int(args.n_mask_seeds), _int(args.n_inferences)
    base_seed = derive_seed(seed, _MASK_STREAM)

    def run(den, tt, opts_base):
        return _ablate_mse(den, tt, ck_scaler, test_ds.features, opts_base, mcar_p,
                           n_seeds, n_inf, base_seed)

    rows: list[list[str]] = []
    per_seed_rows: list[list[str]] = []
    if args.preset == "tau-sweep":
        # retrace depth 5 rides along, matching the published sweep protocol
        for tau in TAU_SWEEP:
            tau_eff = None if tau >= t_sampling else tau  # full length = plain sampler
            opts_base = dict(t_sampling=t_sampling, tau=tau_eff, eta=_float(args.eta),
                             jump_length=1, jump_n_sample=5)
            mse, per_seed = run(denoiser, train_t, opts_base)
            rows.append([f"tau={tau}", _fmt(mse)])
            per_seed_rows += [[f"tau={tau}", str(s), _fmt(v)] for s, v in enumerate(per_seed)]
    elif args.preset == "harmonization":
        for j in (1, 5):
            opts_base = dict(t_sampling=t_sampling, tau=None, eta=_float(args.eta),
                             jump_length=1, jump_n_sample=j)
            mse, per_seed = run(denoiser, train_t, opts_base)
            rows.append([f"j={j}", _fmt(mse)])
            per_seed_rows += [[f"j={j}", str(s), _fmt(v)] for s, v in enumerate(per_seed)]
    elif args.preset == "no-tst":
        if not args.checkpoint_no_tst:
            raise UsageError("--preset no-tst requires --checkpoint-no-tst")
        no_tst_path = Path(args.checkpoint_no_tst)
        if not no_tst_path.exists():
            raise UsageError(f"checkpoint not found: {no_tst_path}")
        den2, tt2, _, _, _ = load_checkpoint(no_tst_path)
        if den2.config.time_embedding:
            raise UsageError(
                "--checkpoint-no-tst must hold a model trained with the time tokenizer disabled"
            )
        if den2.config.arch != arch:
            raise UsageError("both checkpoints must share an architecture")
        opts_base = dict(t_sampling=t_sampling, tau=None, eta=_float(args.eta),
                         jump_length=1, jump_n_sample=_int(args.jump_n_sample))
        for label, den, tt in (("tst", denoiser, train_t), ("no-tst", den2, tt2)):
            mse, per_seed = run(den, tt, opts_base)
            rows.append([label, _fmt(mse)])
            per_seed_rows += [[label, str(s), _fmt(v)] for s, v in enumerate(per_seed)]
    else:
        raise UsageError(f"unknown preset {args.preset!r}")

    resolved = format_config("ablate", {
        "checkpoint": ckpt_path, "checkpoint_no_tst": args.checkpoint_no_tst or "",
        "data": data_path, "preset": args.preset, "mcar": mcar_p, "seed": seed,
        "T_sampling": t_sampling, "n_mask_seeds": n_seeds, "n_inferences": n_inf,
        "eta": args.eta, "jump_n_sample": args.jump_n_sample, "target": args.target or "",
        "split_fraction": args.split_fraction,
    })
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(out_dir / "run_config.txt", resolved)
    comments = header_comments(seed, resolved)
    _write_rows_csv(out_dir / "ablation.csv", ["setting", arch], rows, comments)
    _write_rows_csv(out_dir / "ablation_per_seed.csv", ["setting", "mask_seed", arch],
                    per_seed_rows, comments)
    banner = "".join(f"# {c}\n" for c in comments)
    _write_text(out_dir / "ablation.txt", banner + text_table(["setting", arch], rows))
    _log(f"[ablate] preset {args.preset}: {len(rows)} settings -> {out_dir}")
    return EXIT_OK


# -- argument parser -----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabdiffuse",
        description="Diffusion-based imputation for numeric tabular data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flag(p):
        p.add_argument("--config", default=None,
                       help="key = value config file; CLI flags win")

    p_train = sub.add_parser("train", help="train a denoiser on a complete table")
    add_config_flag(p_train)
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--target", default=None, help="column excluded from the features")
    p_train.add_argument("--arch", choices=ARCHITECTURES, default="mlp")
    p_train.add_argument("--epochs", default=20)
    p_train.add_argument("--batch-size", default=64)
    p_train.add_argument("--T", default=1000, help="training diffusion steps")
    p_train.add_argument("--lr", default=1e-3)
    p_train.add_argument("--weight-decay", default=1e-5)
    p_train.add_argument("--beta-l1", default=1.0)
    p_train.add_argument("--seed", default=0)
    p_train.add_argument("--blocks", default=3)
    p_train.add_argument("--hidden", default=None)
    p_train.add_argument("--embed-dim", default=192)
    p_train.add_argument("--heads", default=8)
    p_train.add_argument("--unet-channels", default="16,32")
    p_train.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    p_train.add_argument("--no-time-embedding", action="store_true")
    p_train.add_argument("--checkpoint-every", default=None)
    p_train.add_argument("--out", required=True, help="output directory")

    p_imp = sub.add_parser("impute", help="fill missing entries with a trained model")
    add_config_flag(p_imp)
    p_imp.add_argument("--checkpoint", required=True)
    p_imp.add_argument("--data", required=True)
    p_imp.add_argument("--target", default=None)
    p_imp.add_argument("--mask", default=None, help="0/1 CSV, 1 = known")
    p_imp.add_argument("--mcar", default=None, help="missing-cell probability")
    p_imp.add_argument("--mar", default=None, help="number of fully missing columns")
    p_imp.add_argument("--T-sampling", default=500)
    p_imp.add_argument("--tau", default=None, help="skip-subset length (fast sampling)")
    p_imp.add_argument("--skip-type", choices=("uniform", "quad"), default="uniform")
    p_imp.add_argument("--eta", default=0.0)
    p_imp.add_argument("--jump-length", default=1)
    p_imp.add_argument("--jump-n-sample", default=1)
    p_imp.add_argument("--n-inferences", default=5)
    p_imp.add_argument("--seed", default=0)
    p_imp.add_argument("--out", required=True, help="imputed CSV path")

    p_bench = sub.add_parser("benchmark", help="baselines + diffusion over a mask grid")
    add_config_flag(p_bench)
    p_bench.add_argument("--data", required=True)
    p_bench.add_argument("--target", default=None)
    p_bench.add_argument("--methods", default=None,
                         help="comma list; baselines and diffusion-<arch>")
    p_bench.add_argument("--checkpoint", action="append", default=None,
                         help="repeatable; provides diffusion-<arch> methods")
    p_bench.add_argument("--grid", nargs="+", default=["mcar=10..90"],
                         help="e.g. mcar=10..90 mar=1..4 or mcar=30,50")
    p_bench.add_argument("--split-fraction", default=0.8)
    p_bench.add_argument("--n-mask-seeds", default=5)
    p_bench.add_argument("--n-inferences", default=5)
    p_bench.add_argument("--T-sampling", default=500)
    p_bench.add_argument("--tau", default=None)
    p_bench.add_argument("--eta", default=0.0)
    p_bench.add_argument("--jump-length", default=1)
    p_bench.add_argument("--jump-n-sample", default=1)
    p_bench.add_argument("--report-space", choices=("scaled", "raw"), default="scaled")
    p_bench.add_argument("--jobs", default=1)
    p_bench.add_argument("--seed", default=0)
    p_bench.add_argument("--out-dir", required=True)

    p_abl = sub.add_parser("ablate", help="time-embedding / retrace / skip-length sweeps")
    add_config_flag(p_abl)
    p_abl.add_argument("--checkpoint", required=True)
    p_abl.add_argument("--checkpoint-no-tst", default=None)
    p_abl.add_argument("--data", required=True)
    p_abl.add_argument("--target", default=None)
    p_abl.add_argument("--preset", choices=("no-tst", "harmonization", "tau-sweep"),
                       required=True)
    p_abl.add_argument("--mcar", default=0.3)
    p_abl.add_argument("--split-fraction", default=0.8)
    p_abl.add_argument("--T-sampling", default=500)
    p_abl.add_argument("--eta", default=0.0)
    p_abl.add_argument("--jump-n-sample", default=1)
    p_abl.add_argument("--n-mask-seeds", default=5)
    p_abl.add_argument("--n-inferences", default=5)
    p_abl.add_argument("--seed", default=0)
    p_abl.add_argument("--out-dir", required=True)

    parser.command_parsers = {
        "train": p_train, "impute": p_imp, "benchmark": p_bench, "ablate": p_abl,
    }
    return parser


COMMANDS = {
    "train": cmd_train,
    "impute": cmd_impute,
    "benchmark": cmd_benchmark,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, parser, args.command)
        return COMMANDS[args.command](args, parser)
    except (UsageError, CsvFormatError, CheckpointError, BaselineError) as err:
        _log(f"error: {err}")
        return EXIT_USAGE
    except ValueError as err:
        _log(f"error: {err}")
        return EXIT_USAGE
    except OSError as err:
        _log(f"error: {err}")
        return EXIT_USAGE
    except (NumericError, TrainingDiverged) as err:
        _log(f"numeric failure: {err}")
        return EXIT_NUMERIC
    except Exception:  # noqa: BLE001 - surface invariant violations distinctly
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
