"""Monte-Carlo experiment driver: per-trial simulation of the full relay
pipeline, sweep orchestration with CSV persistence, and per-iteration image
dumps.

Seeding: every trial derives its noise from
SeedSequence((master_seed, snr_index, rho_index, trial, stream)) where stream
0 is the S-D AWGN draw, 1 the relay bit-flip draw, and 2 the R-D AWGN draw,
so no two trials share realizations and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import ChannelParams, IntraLinkModel, bpsk_awgn, bsc_corrupt, channel_llr
from .correlation import CorrelationEstimate
from .joint import TraceTruth, independent_decode, joint_decode
from .ldpc import LdpcCode, build_code, encode_stream
from .media import dequantize_image, load_image_any, quantize_image, save_png
from .semantic import SemanticModel, load_model, sem_decode, sem_encode, bits_to_features, features_to_bits

CSV_HEADER = "snr_db,rho,trial,iter,ed_joint,ed_independent,ber_joint,ber_independent"


def bundled_asset(rel: str) -> Path:
    """Path of a file shipped inside the package (demo model, sample images)."""
    return Path(str(resources.files("sfrelay"))) / "assets" / rel


@dataclass(frozen=True)
class SimConfig:
    snr_sd_list: tuple = tuple(float(s) for s in range(-5, 10))
    snr_rd: float = 20.0
    rho_list: tuple = (0.0, 0.1, 0.35)
    global_iters: int = 7
    local_iters: int = 1
    trials: int = 20
    master_seed: int = 42
    kappa: float = 2.0
    n: int = 900
    dv: int = 2
    dc: int = 3
    code_seed_sd: int = 1
    code_seed_rd: int = 2
    estimate_rho: bool = False
    images: str = ""
    model: str = ""
    out: str = "results.csv"
    threads: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for r in self.rho_list:
            if not 0.0 <= r <= 0.5:
                raise ValueError(f"rho {r} outside [0, 0.5]")
        if self.global_iters < 0 or self.local_iters < 1:
            raise ValueError("bad iteration counts")


@dataclass
class TrialRecord:
    snr_db: float
    rho: float
    trial: int
    ed_joint: list[float]
    ed_independent: list[float]
    ber_joint: list[float]
    ber_independent: list[float]
    ber_branch2: list[float]
    ed_semantic: list[float]
    wall_time: float


def derive_seed(master_seed: int, snr_index: int, rho_index: int, trial: int,
                stream: int) -> int:
    ss = np.random.SeedSequence((master_seed, snr_index, rho_index, trial, stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def parse_config_file(path: str | os.PathLike) -> dict:
    """key=value lines, # comments; values keep their flag syntax (ranges,
    comma lists) and are coerced by SimConfig field type."""
    raw = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        raw[key.replace("-", "_")] = val
    return raw


def parse_snr_list(text: str) -> tuple:
    """Either comma-separated values or start:stop:step (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad range {text!r}, want start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("range step must be > 0")
        vals = np.arange(start, stop + step / 2, step)
        return tuple(float(v) for v in vals)
    return tuple(float(v) for v in text.split(","))


def parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


# flag spellings accepted in config files alongside the field names
_KEY_ALIASES = {"snr_sd": "snr_sd_list", "rho": "rho_list", "seed": "master_seed"}


def config_from_mapping(raw: dict, base: Optional[SimConfig] = None) -> SimConfig:
    base = base or SimConfig()
    kwargs = {}
    types = {f.name: f.type for f in fields(SimConfig)}
    for key, val in raw.items():
        key = _KEY_ALIASES.get(key, key)
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(val, str):
            if key == "snr_sd_list":
                val = parse_snr_list(val)
            elif key == "rho_list":
                val = parse_float_list(val)
            elif key in ("snr_rd", "kappa"):
                val = float(val)
            elif key == "estimate_rho":
                val = val.lower() in ("1", "true", "yes", "on")
            elif key in ("images", "model", "out"):
                pass
            else:
                val = int(val)
        kwargs[key] = val
    return replace(base, **kwargs)


class SweepContext:
    """Heavy per-process state shared by all trials: codes, model, images."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.code1 = build_code(cfg.n, cfg.dv, cfg.dc, seed=cfg.code_seed_sd)
        self.code2 = build_code(cfg.n, cfg.dv, cfg.dc, seed=cfg.code_seed_rd)
        # a (2,3)-regular check matrix has rank m - c for c connected
        # components, so k = n/3 + c; anything far above n/3 means a
        # fragmented (weak) graph
        for code in (self.code1, self.code2):
            if not code.n // 3 < code.k <= code.n // 3 + 10:
                raise ValueError(f"degenerate code: n={code.n} k={code.k}")
        model_path = cfg.model or bundled_asset("model.sfrw")
        self.model = load_model(model_path)
        if cfg.images:
            paths = sorted(p for p in Path(cfg.images).iterdir()
                           if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bin"))
        else:
            paths = sorted(bundled_asset("mini").glob("*.png"))
        if not paths:
            raise ValueError("no input images found")
        self.images = [load_image_any(p) for p in paths]


def run_trial(ctx: SweepContext, snr_index: int, rho_index: int, trial: int,
              keep_images: bool = False):
    """Simulate one operating point: source encode/broadcast, relay
    semantic-forward, destination joint + independent decode."""
    cfg = ctx.cfg
    snr_db = cfg.snr_sd_list[snr_index]
    rho = cfg.rho_list[rho_index]
    img = ctx.images[trial % len(ctx.images)]
    t0 = time.perf_counter()

    x_bits = quantize_image(img)
    ref = dequantize_image(x_bits)

    p1 = ChannelParams(snr_db, derive_seed(cfg.master_seed, snr_index, rho_index, trial, 0))
    cw1, _ = encode_stream(ctx.code1, x_bits)
    llr1 = channel_llr(bpsk_awgn(cw1.reshape(-1), p1), p1)

    y_bits = bsc_corrupt(x_bits, IntraLinkModel(rho),
                         derive_seed(cfg.master_seed, snr_index, rho_index, trial, 1))
    y_img = dequantize_image(y_bits)
    s_bits = features_to_bits(ctx.model, sem_encode(ctx.model, y_img))

    p2 = ChannelParams(cfg.snr_rd, derive_seed(cfg.master_seed, snr_index, rho_index, trial, 2))
    cw2, _ = encode_stream(ctx.code2, s_bits)
    llr2 = channel_llr(bpsk_awgn(cw2.reshape(-1), p2), p2)

    truth = TraceTruth(x_bits=x_bits, image=ref, s_bits=s_bits)
    est = CorrelationEstimate(rho)
    _, jtrace = joint_decode(llr1, llr2, ctx.code1, ctx.code2, ctx.model, est,
                             global_iters=cfg.global_iters, kappa=cfg.kappa,
                             local_iters=cfg.local_iters, truth=truth,
                             keep_images=keep_images,
                             reestimate_rho=cfg.estimate_rho)
    _, itrace = independent_decode(llr1, ctx.code1, total_iters=cfg.global_iters + 1,
                                   truth=truth, keep_images=keep_images)

    rec = TrialRecord(
        snr_db=snr_db, rho=rho, trial=trial,
        ed_joint=[e.ed_joint for e in jtrace.entries],
        ed_independent=[e.ed_joint for e in itrace.entries],
        ber_joint=[e.ber_branch1 for e in jtrace.entries],
        ber_independent=[e.ber_branch1 for e in itrace.entries],
        ber_branch2=[e.ber_branch2 for e in jtrace.entries],
        ed_semantic=[e.ed_semantic for e in jtrace.entries],
        wall_time=time.perf_counter() - t0,
    )
    if keep_images:
        return rec, jtrace, itrace
    return rec


_WORKER_CTX = None


def _worker_init(cfg: SimConfig):
    global _WORKER_CTX
    _WORKER_CTX = SweepContext(cfg)


def _worker_run(task):
    snr_index, rho_index, trial = task
    try:
        return task, run_trial(_WORKER_CTX, snr_index, rho_index, trial), None
    except Exception as exc:  # sweep must survive individual trial failures
        return task, None, f"{type(exc).__name__}: {exc}"


def max_workers(cfg: SimConfig) -> int:
    env = os.environ.get("SFRELAY_THREADS", "")
    cap = int(env) if env else (cfg.threads or os.cpu_count() or 1)
    return max(1, cap)


def run_sweep(cfg: SimConfig, progress=None):
    """Full snr x rho x trials grid. Returns (records, summary, failures) and
    writes the CSV when cfg.out is set."""
    tasks = [(si, ri, t)
             for si in range(len(cfg.snr_sd_list))
             for ri in range(len(cfg.rho_list))
             for t in range(cfg.trials)]
    workers = min(max_workers(cfg), len(tasks))
    results = []
    if workers <= 1:
        _worker_init(cfg)
        for task in tasks:
            results.append(_worker_run(task))
            if progress:
                progress(len(results), len(tasks), results[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(cfg,)) as pool:
            for res in pool.map(_worker_run, tasks, chunksize=1):
                results.append(res)
                if progress:
                    progress(len(results), len(tasks), res)

    records = [rec for _, rec, err in results if err is None]
    failures = [(task, err) for task, _, err in results if err is not None]
    records.sort(key=lambda r: (r.snr_db, r.rho, r.trial))
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        with open(cfg.out, "w", newline="") as fh:
            fh.write(format_csv(records, cfg.global_iters))
    summary = summarize(records, cfg.global_iters)
    return records, summary, failures


def format_csv(records: list[TrialRecord], global_iters: int) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in records:
        for it in range(global_iters + 1):
            w.writerow([f"{r.snr_db:.10g}", f"{r.rho:.10g}", r.trial, it,
                        f"{r.ed_joint[it]:.10g}", f"{r.ed_independent[it]:.10g}",
                        f"{r.ber_joint[it]:.10g}", f"{r.ber_independent[it]:.10g}"])
    return buf.getvalue()


def summarize(records: list[TrialRecord], global_iters: int):
    """Mean EDs per (snr, rho, iter); one row per grid cell and iteration."""
    groups = {}
    for r in records:
        groups.setdefault((r.snr_db, r.rho), []).append(r)
    rows = []
    for (snr_db, rho), recs in sorted(groups.items()):
        for it in range(global_iters + 1):
            rows.append({
                "snr_db": snr_db, "rho": rho, "iter": it,
                "mean_ed_joint": float(np.mean([r.ed_joint[it] for r in recs])),
                "mean_ed_independent": float(np.mean([r.ed_independent[it] for r in recs])),
                "trials": len(recs),
            })
    return rows


def dump_iteration_images(cfg: SimConfig, snr_db: float, rho: float,
                          img: np.ndarray, out_dir: str | os.PathLike):
    """Write independent/joint/semantic reconstructions for every global
    iteration as {kind}_iter{t}.png; 3*(global_iters+1) files."""
    cfg = replace(cfg, snr_sd_list=(float(snr_db),), rho_list=(float(rho),))
    ctx = SweepContext(cfg)
    ctx.images = [np.asarray(img, dtype=np.float64)]
    _, jtrace, itrace = run_trial(ctx, 0, 0, 0, keep_images=True)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(cfg.global_iters + 1):
        for kind, image in (("independent", itrace[t].image),
                            ("joint", jtrace[t].image),
                            ("semantic", jtrace[t].semantic_image)):
            p = out / f"{kind}_iter{t}.png"
            save_png(image, p)
            paths.append(p)
    return paths
