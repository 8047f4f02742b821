"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time from ``MIDITONAL_DISABLE_JIT``. Timings are best-of-N after one
warm-up call, so numba compilation is excluded.

    python3 benchmarks/bench_jit.py [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from miditonal import kernels
from miditonal.classifier import assign_roles, train_role_models, LabeledTrack
from miditonal.forest import ForestParams
from miditonal.midi_io import build_note_list
from miditonal.report import analyse_midi
from miditonal.synth import long_song

repeats = int(sys.argv[1])
song = long_song(seed=3, minutes=10)
rng = np.random.default_rng(0)
X = rng.normal(size=(1500, 30))
labels = [{("melody", "bass", "harmony")[i % 3]} for i in range(1500)]
X[np.arange(1500) % 3 == 0, 2] += 2.0
data = [LabeledTrack(x, l, str(i), 0) for i, (x, l) in enumerate(zip(X, labels))]
models = train_role_models(data[:300], ForestParams(n_trees=10, seed=1))

def best(fn):
    fn()
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

out = {
    "backend": kernels.BACKEND,
    "tension, 10-minute song": best(lambda: analyse_midi(song)),
    "forest training, 1500 x 30, 3 roles x 30 trees": best(lambda: train_role_models(data, ForestParams(n_trees=30, seed=2))),
    "forest prediction, 3 roles x 50000 rows": best(lambda: [m.predict_proba(np.tile(X, (34, 1))[:50000]) for m in models.values()]),
}
print(json.dumps(out))
"""


def run(disable_jit: bool, repeats: int) -> dict:
    env = dict(os.environ)
    env.pop("MIDITONAL_DISABLE_JIT", None)
    if disable_jit:
        env["MIDITONAL_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeats)], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    jit = run(False, args.repeats)
    ref = run(True, args.repeats)
    print(f"{'workload':<50}{'numba s':>10}{'numpy s':>10}{'speed-up':>10}")
    for key in jit:
        if key == "backend":
            continue
        print(f"{key:<50}{jit[key]:>10.4f}{ref[key]:>10.4f}{ref[key] / jit[key]:>9.1f}x")
    print(f"(backends reported: {jit['backend']}, {ref['backend']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
