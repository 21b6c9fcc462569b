"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from evmforge import _backend, evm, pyramid, ssim, synth, tfilter
from evmforge.tfilter import BandSpec


def cases(rng):
    frame = rng.random((256, 256, 3))
    clip = rng.random((64, 64, 64, 3))
    x, y = rng.random((128, 128)), rng.random((128, 128))
    seq = synth.sine_brightness(frames=64, width=64, height=64, freq=0.9375)
    band = BandSpec(0.8, 1.0)
    return {
        "laplacian 256x256 d5": lambda: pyramid.collapse(pyramid.build_laplacian(frame, 5)),
        "ssim_pair 128x128": lambda: ssim.ssim_pair(x, y),
        "iir_bandpass 64x64x64x3": lambda: tfilter.iir_bandpass(clip, 30.0, band),
        "magnify MOTION 64 frames": lambda: evm.magnify(seq, evm.MagParams(mode="MOTION", depth=3)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _backend.available()
    results = {}
    for name in backends:
        with _backend.use_backend(name):
            for label, fn in cases(np.random.default_rng(0)).items():
                fn()  # warm up
                results[label, name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    labels = list(cases(np.random.default_rng(0)))
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label in labels:
        row = f"{label:<28}" + "".join(f"{results[label, b] * 1e3:>10.2f}ms" for b in backends)
        if "cython" in backends and "python" in backends:
            row += f"{results[label, 'python'] / results[label, 'cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
