"""Config-driven experiment runner.

Four experiment kinds share one surface: 1D high-frequency regression, 2D
residual image regression, the randomized risk-chain suite, and the
Gaussian-count bound table. Results land in an output directory as CSV files
whose bodies are byte-stable for a given configuration and seeds; wall-clock
information goes to a sidecar log only. Independent (model, seed) runs can
execute in a worker pool.
"""

from __future__ import annotations

import math
import multiprocessing
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import metrics, risk
from .config import ExperimentConfig
from .errors import ConfigurationError, RiskChainViolation
from .estimator import NeuralFieldRegressor
from .lambertw import gaussian_count_bound
from .netpbm import load_image
from .signals import make_image_pair, make_signal_pair

BASELINE = "baseline"


def fmt(value) -> str:
    """Canonical float formatting: 9 significant digits, inf/nan spelled out."""
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.9g}"


def _canonical(value) -> float:
    return float(fmt(value))


@dataclass(frozen=True)
class MetricRow:
    model: str
    encoding: str
    split: str
    seed: int
    psnr: float
    ssim: float | None = None


@dataclass
class RunRecord:
    kind: str
    config_hash: str
    rows: tuple
    traces: dict  # (model, seed) -> tuple of (iteration, loss)
    wall_seconds: float | None = None

    def mean(self, model: str, split: str, metric: str = "psnr") -> float:
        values = [getattr(r, metric) for r in self.rows
                  if r.model == model and r.split == split]
        if not values or any(v is None for v in values):
            raise ConfigurationError(
                f"no {metric} values recorded for {model!r}/{split!r}"
            )
        return float(np.mean(values))

    def model_names(self):
        seen = []
        for row in self.rows:
            if row.model not in seen:
                seen.append(row.model)
        return seen

    @classmethod
    def load(cls, out_dir) -> "RunRecord":
        meta = {}
        with open(os.path.join(out_dir, "run_meta.csv"), "r", encoding="utf-8") as fh:
            header = fh.readline()
            assert header.strip() == "key,value"
            for line in fh:
                key, value = line.rstrip("\n").split(",", 1)
                meta[key] = value
        rows = []
        with open(os.path.join(out_dir, "metrics.csv"), "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            assert header == "model,encoding,split,seed,psnr,ssim"
            for line in fh:
                model, encoding, split, seed, p, s = line.rstrip("\n").split(",")
                rows.append(MetricRow(model=model, encoding=encoding, split=split,
                                      seed=int(seed), psnr=float(p),
                                      ssim=float(s) if s else None))
        traces = {}
        trace_dir = os.path.join(out_dir, "traces")
        if os.path.isdir(trace_dir):
            for name in sorted(os.listdir(trace_dir)):
                stem = name[len("trace_"):-len(".csv")]
                model, seed = stem.rsplit("_", 1)
                entries = []
                with open(os.path.join(trace_dir, name), "r", encoding="utf-8") as fh:
                    fh.readline()
                    for line in fh:
                        it, loss = line.rstrip("\n").split(",")
                        entries.append((int(it), float(loss)))
                traces[(model, int(seed))] = tuple(entries)
        return cls(kind=meta["kind"], config_hash=meta["config_hash"],
                   rows=tuple(rows), traces=traces)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_image_path(path: str) -> str:
    if path.startswith("builtin:"):
        from importlib.resources import files
        name = path[len("builtin:"):]
        return str(files("qonv").joinpath("data", f"{name}.ppm"))
    return path


def _split_mask_1d(n: int, signal_cfg: dict, seed: int) -> np.ndarray:
    if signal_cfg["split"] == "even_odd":
        return (np.arange(n) % 2 == 0).astype(np.float64)
    rng = np.random.default_rng(seed + 20_000)
    count = int(round(signal_cfg["train_fraction"] * n))
    count = min(max(count, 1), n - 1)
    chosen = rng.choice(n, size=count, replace=False)
    mask = np.zeros(n)
    mask[chosen] = 1.0
    return mask


def _split_mask_2d(shape, val_fraction: float, seed: int) -> np.ndarray:
    h, w = shape
    rng = np.random.default_rng(seed + 20_000)
    mask = (rng.random((h, w)) >= val_fraction).astype(np.float64)
    if mask.sum() in (0, h * w):
        raise ConfigurationError("pixel split left a side empty; adjust val_fraction")
    return mask


def _estimator_for(entry_params: dict, train_cfg: dict, seed: int,
                   default_residual: bool) -> NeuralFieldRegressor:
    params = dict(entry_params)
    family = params.pop("family")
    residual = params.pop("residual_output",
                          default_residual if family != "mlp" else False)
    return NeuralFieldRegressor(
        family=family,
        residual_output=residual,
        optimizer=train_cfg["optimizer"],
        lr=train_cfg["lr"],
        weight_decay=train_cfg["weight_decay"],
        iterations=train_cfg["iterations"],
        seed=seed,
        **params,
    )


def _logged_trace(trace: np.ndarray, log_every: int):
    picked = list(range(0, trace.size, log_every))
    if picked[-1] != trace.size - 1:
        picked.append(trace.size - 1)
    return tuple((it, _canonical(trace[it])) for it in picked)


def _run_1d_task(args):
    entry_name, entry_params, signal_cfg, train_cfg, seed = args
    pair = make_signal_pair(signal_cfg["n"], signal_cfg["alpha"],
                            signal_cfg["cutoff"], seed)
    n = pair.full.shape[1]
    train_mask = _split_mask_1d(n, signal_cfg, seed)
    est = _estimator_for(entry_params, train_cfg, seed, default_residual=False)
    residual = est.residual_output
    target = pair.full if residual else pair.high
    low = pair.low if est.family in ("cnn", "qnn") else None
    est.fit(pair.coords, target, low_freq=low, sample_mask=train_mask)
    pred = est.predict(pair.coords, low_freq=low)
    recon = pred if residual else pair.low + pred
    peak = signal_cfg["psnr_peak"]
    train_sel = train_mask.astype(bool)
    rows = [
        MetricRow(entry_name, est.encoding, "train", seed,
                  _canonical(metrics.psnr(recon[:, train_sel],
                                          pair.full[:, train_sel], peak))),
        MetricRow(entry_name, est.encoding, "val", seed,
                  _canonical(metrics.psnr(recon[:, ~train_sel],
                                          pair.full[:, ~train_sel], peak))),
    ]
    return rows, (entry_name, seed), _logged_trace(est.loss_trace_,
                                                   train_cfg["log_every"])


def _baseline_rows_1d(signal_cfg, seed):
    pair = make_signal_pair(signal_cfg["n"], signal_cfg["alpha"],
                            signal_cfg["cutoff"], seed)
    train_sel = _split_mask_1d(pair.full.shape[1], signal_cfg, seed).astype(bool)
    peak = signal_cfg["psnr_peak"]
    return [
        MetricRow(BASELINE, "-", "train", seed,
                  _canonical(metrics.psnr(pair.low[:, train_sel],
                                          pair.full[:, train_sel], peak))),
        MetricRow(BASELINE, "-", "val", seed,
                  _canonical(metrics.psnr(pair.low[:, ~train_sel],
                                          pair.full[:, ~train_sel], peak))),
    ]


def _run_2d_task(args):
    entry_name, entry_params, image_cfg, train_cfg, seed = args
    gt = load_image(resolve_image_path(image_cfg["path"]))
    pair = make_image_pair(gt, image_cfg["blur_sigma"])
    train_mask = _split_mask_2d(gt.shape[1:], image_cfg["val_fraction"], seed)
    est = _estimator_for(entry_params, train_cfg, seed, default_residual=True)
    residual = est.residual_output
    target = pair.ground_truth if residual else pair.ground_truth - pair.low
    low = pair.low if est.family in ("cnn", "qnn") else None
    est.fit(pair.coords, target, low_freq=low, sample_mask=train_mask)
    pred = est.predict(pair.coords, low_freq=low)
    recon = pred if residual else pair.low + pred
    rows = _image_metric_rows(entry_name, est.encoding, recon, pair.ground_truth,
                              train_mask, image_cfg["psnr_peak"], seed)
    return rows, (entry_name, seed), _logged_trace(est.loss_trace_,
                                                   train_cfg["log_every"])


def _image_metric_rows(name, encoding, recon, gt, train_mask, peak, seed):
    rows = []
    for split, selector in (("train", train_mask.astype(bool)),
                            ("val", ~train_mask.astype(bool))):
        p = metrics.psnr(recon[:, selector], gt[:, selector], peak)
        s = metrics.ssim_masked(recon, gt, selector)
        rows.append(MetricRow(name, encoding, split, seed,
                              _canonical(p), _canonical(s)))
    return rows


def _baseline_rows_2d(image_cfg, seed):
    gt = load_image(resolve_image_path(image_cfg["path"]))
    pair = make_image_pair(gt, image_cfg["blur_sigma"])
    train_mask = _split_mask_2d(gt.shape[1:], image_cfg["val_fraction"], seed)
    return _image_metric_rows(BASELINE, "-", pair.low, pair.ground_truth,
                              train_mask, image_cfg["psnr_peak"], seed)


def _run_tasks(task_fn, tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(processes=jobs) as pool:
            return pool.map(task_fn, tasks)
    return [task_fn(task) for task in tasks]


def _write_metrics_csv(out_dir, rows):
    lines = ["model,encoding,split,seed,psnr,ssim"]
    for row in rows:
        ssim_text = "" if row.ssim is None else fmt(row.ssim)
        lines.append(f"{row.model},{row.encoding},{row.split},{row.seed},"
                     f"{fmt(row.psnr)},{ssim_text}")
    _atomic_write(os.path.join(out_dir, "metrics.csv"), "\n".join(lines) + "\n")


def _write_summary_csv(out_dir, record: RunRecord):
    entries = []
    for model in record.model_names():
        encoding = next(r.encoding for r in record.rows if r.model == model)
        means = {}
        for split in ("val", "train"):
            means[f"{split}_psnr"] = record.mean(model, split, "psnr")
            ssims = [r.ssim for r in record.rows
                     if r.model == model and r.split == split]
            means[f"{split}_ssim"] = (None if any(s is None for s in ssims)
                                      else float(np.mean(ssims)))
        entries.append((model, encoding, means))
    entries.sort(key=lambda e: -e[2]["val_psnr"])
    lines = ["model,encoding,mean_val_psnr,mean_val_ssim,"
             "mean_train_psnr,mean_train_ssim"]
    for model, encoding, means in entries:
        val_ssim = "" if means["val_ssim"] is None else fmt(means["val_ssim"])
        train_ssim = "" if means["train_ssim"] is None else fmt(means["train_ssim"])
        lines.append(f"{model},{encoding},{fmt(means['val_psnr'])},{val_ssim},"
                     f"{fmt(means['train_psnr'])},{train_ssim}")
    _atomic_write(os.path.join(out_dir, "summary.csv"), "\n".join(lines) + "\n")


def _write_traces(out_dir, traces):
    for (model, seed), entries in sorted(traces.items()):
        lines = ["iteration,loss"]
        lines.extend(f"{it},{fmt(loss)}" for it, loss in entries)
        _atomic_write(os.path.join(out_dir, "traces", f"trace_{model}_{seed}.csv"),
                      "\n".join(lines) + "\n")


def _write_meta(out_dir, kind, config_hash):
    text = f"key,value\nkind,{kind}\nconfig_hash,{config_hash}\n"
    _atomic_write(os.path.join(out_dir, "run_meta.csv"), text)


def _write_log(out_dir, lines):
    _atomic_write(os.path.join(out_dir, "run.log"), "\n".join(lines) + "\n")


def evaluate_assertions(record: RunRecord, assertions):
    """Check each configured ordering claim on mean validation metrics."""
    failures = []
    for check in assertions:
        try:
            lhs = record.mean(check.lhs, "val", check.metric)
            rhs = record.mean(check.rhs, "val", check.metric) + check.margin
        except ConfigurationError as exc:
            failures.append(f"{check.name}: {exc}")
            continue
        ok = lhs > rhs if check.strict else lhs >= rhs
        if not ok:
            failures.append(
                f"{check.name}: {check.describe()} failed "
                f"({lhs:.4f} vs {rhs:.4f})"
            )
    return failures


def _run_regression(cfg: ExperimentConfig, out_dir, jobs, seed_offset,
                    task_fn, baseline_fn, data_cfg):
    start = time.time()
    seeds = [s + seed_offset for s in cfg.seeds]
    tasks = [(entry.name, entry.params, data_cfg, cfg.train, seed)
             for entry in cfg.models for seed in seeds]
    results = _run_tasks(task_fn, tasks, jobs)
    rows = []
    for seed in seeds:
        rows.extend(baseline_fn(data_cfg, seed))
    traces = {}
    for task_rows, key, trace in results:
        rows.extend(task_rows)
        traces[key] = trace
    record = RunRecord(kind=cfg.kind, config_hash=cfg.config_hash(),
                       rows=tuple(rows), traces=traces,
                       wall_seconds=time.time() - start)
    _write_meta(out_dir, cfg.kind, record.config_hash)
    _write_metrics_csv(out_dir, record.rows)
    _write_summary_csv(out_dir, record)
    _write_traces(out_dir, traces)
    failures = evaluate_assertions(record, cfg.assertions)
    log = [f"finished_at={time.strftime('%Y-%m-%dT%H:%M:%S')}",
           f"wall_seconds={record.wall_seconds:.3f}",
           f"jobs={jobs}", f"seed_offset={seed_offset}"]
    log.extend(f"assertion_failed={line}" for line in failures)
    _write_log(out_dir, log)
    return record, failures


def run_regress1d(cfg: ExperimentConfig, out_dir=None, jobs=1, seed_offset=0):
    out_dir = out_dir or cfg.out_dir
    return _run_regression(cfg, out_dir, jobs, seed_offset,
                           _run_1d_task, _baseline_rows_1d, cfg.signal)


def run_regress2d(cfg: ExperimentConfig, out_dir=None, jobs=1, seed_offset=0):
    out_dir = out_dir or cfg.out_dir
    # A missing or unreadable image surfaces as an ImageIOError from the
    # loader, mapping to the I/O exit code.
    load_image(resolve_image_path(cfg.image["path"]))
    return _run_regression(cfg, out_dir, jobs, seed_offset,
                           _run_2d_task, _baseline_rows_2d, cfg.image)


def run_theory(cfg: ExperimentConfig, out_dir=None, jobs=1, seed_offset=0):
    """Randomized risk-chain suite; returns (record, failures)."""
    out_dir = out_dir or cfg.out_dir
    start = time.time()
    theory = cfg.theory
    rng = np.random.default_rng(theory["seed"] + seed_offset)
    chain_rows = []
    failures = []
    problems = [risk.random_problem(rng, max_size=theory["max_size"],
                                    shift_mode=theory["shift_mode"])
                for _ in range(theory["instances"])]
    problems.append(risk.strict_gap_problem())
    for index, problem in enumerate(problems):
        try:
            r1, r2, r3 = risk.verify_monotone_chain(problem)
            chain_rows.append((index, r1, r2, r3))
        except RiskChainViolation as exc:
            failures.append(f"instance {index}: {exc}")
            _atomic_write(os.path.join(out_dir, f"violation_{index}.txt"),
                          exc.record + "\n")
    lines = ["instance,r1,r2,r3"]
    lines.extend(f"{i},{fmt(r1)},{fmt(r2)},{fmt(r3)}"
                 for i, r1, r2, r3 in chain_rows)
    _atomic_write(os.path.join(out_dir, "theory.csv"), "\n".join(lines) + "\n")
    r3_max = max((r[3] for r in chain_rows), default=0.0)
    summary = ["key,value",
               f"instances,{len(problems)}",
               f"violations,{len(failures)}",
               f"strict_gap_instances,"
               f"{sum(1 for r in chain_rows if r[1] > r[2] + 1e-12)}",
               f"max_r3,{fmt(r3_max)}"]
    _atomic_write(os.path.join(out_dir, "theory_summary.csv"),
                  "\n".join(summary) + "\n")
    _write_meta(out_dir, cfg.kind, cfg.config_hash())
    _write_log(out_dir, [f"wall_seconds={time.time() - start:.3f}"])
    record = RunRecord(kind=cfg.kind, config_hash=cfg.config_hash(),
                       rows=(), traces={}, wall_seconds=time.time() - start)
    return record, failures


def bound_table(c: float, eps_values):
    """Rows of (eps, bound, ratio bound(eps/2)/bound(eps))."""
    rows = []
    for eps in eps_values:
        n = gaussian_count_bound(eps, c)
        ratio = gaussian_count_bound(eps / 2.0, c) / n
        rows.append((eps, n, ratio))
    return rows


def run_bound_table(cfg: ExperimentConfig, out_dir=None, jobs=1, seed_offset=0):
    out_dir = out_dir or cfg.out_dir
    start = time.time()
    rows = bound_table(cfg.bound["c"], cfg.bound["eps"])
    lines = ["eps,n_bound,ratio_half"]
    lines.extend(f"{fmt(eps)},{fmt(n)},{fmt(ratio)}" for eps, n, ratio in rows)
    _atomic_write(os.path.join(out_dir, "bound.csv"), "\n".join(lines) + "\n")
    _write_meta(out_dir, cfg.kind, cfg.config_hash())
    _write_log(out_dir, [f"wall_seconds={time.time() - start:.3f}"])
    record = RunRecord(kind=cfg.kind, config_hash=cfg.config_hash(),
                       rows=(), traces={}, wall_seconds=time.time() - start)
    return record, []


RUNNERS = {
    "regress1d": run_regress1d,
    "regress2d": run_regress2d,
    "theory": run_theory,
    "bound_table": run_bound_table,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs=1, seed_offset=0):
    return RUNNERS[cfg.kind](cfg, out_dir=out_dir, jobs=jobs,
                             seed_offset=seed_offset)
