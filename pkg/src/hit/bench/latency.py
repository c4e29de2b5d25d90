from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def _inputs(cfg, seed: int):
    rng = np.random.default_rng(seed)
    z = rng.random((cfg.template_size, cfg.template_size, 3), dtype=np.float32)
    x = rng.random((cfg.search_size, cfg.search_size, 3), dtype=np.float32)
    return z, x


def measure_latency(model, iters: int = 10, warmup: int = 2, seed: int = 0) -> dict:
    """Wall-clock statistics of repeated forward passes on one fixed random input pair.

    Warmup passes run first and are discarded.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    z, x = _inputs(model.cfg, seed)
    for _ in range(warmup):
        model(z, x)
    times = []
    for _ in range(iters):
        t0 = time.perf_counter()
        model(z, x)
        times.append((time.perf_counter() - t0) * 1e3)
    times = np.asarray(times)
    mean = float(times.mean())
    return {
        "iters": iters,
        "warmup": warmup,
        "mean_ms": mean,
        "p50": float(np.percentile(times, 50)),
        "p95": float(np.percentile(times, 95)),
        "fps": 1000.0 / mean,
        "samples_ms": times.tolist(),
    }


def measure_throughput(model, threads: int, iters: int = 4, seed: int = 0) -> dict:
    """Aggregate frames/s with ``threads`` concurrent callers sharing one read-only model."""
    if threads < 1 or iters < 1:
        raise ValueError("threads and iters must be >= 1")
    z, x = _inputs(model.cfg, seed)
    model(z, x)

    def worker(_):
        for _ in range(iters):
            model(z, x)

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(worker, range(threads)))
    elapsed = time.perf_counter() - t0
    return {"threads": threads, "frames": threads * iters, "seconds": elapsed, "fps": threads * iters / elapsed}
