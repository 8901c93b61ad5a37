"""Compare the numba-compiled kernels with their pure Python / numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Kernel timings use the jitted function and its ``py_func`` in the same
process.  The end-to-end rows run a short rollout workload twice in fresh
interpreters, once normally and once with ``KFRELAX_NO_JIT=1``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from kfrelax import envs, rl
from kfrelax._jit import USE_NUMBA, python_impl

WORKLOAD = """
import time
from kfrelax import rl
from kfrelax.envs import make_env
from kfrelax.samplers import Rng
env = make_env("{env}")
policy = rl.Policy.init(env.obs_dim, env.n_actions, Rng(0))
gen = Rng(1)
rl.rollout(env, policy, gen, max_steps=5)
t0 = time.perf_counter()
steps = sum(len(rl.rollout(env, policy, gen)) for _ in range({episodes}))
print(steps, time.perf_counter() - t0)
"""


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_cartpole(fast, slow, n, repeat):
    def run(kernel):
        def go():
            s = (0.01, 0.0, 0.02, 0.0)
            for i in range(n):
                x, xd, th, thd, _ = kernel(*s, i & 1)
                s = (x, xd, th, thd)
        return go
    return _best(run(fast), repeat, 1) / n, _best(run(slow), repeat, 1) / n


def bench_acrobot(fast, slow, n, repeat):
    def run(kernel):
        def go():
            s = (0.05, -0.02, 0.0, 0.0)
            for i in range(n):
                t1, t2, d1, d2, _ = kernel(*s, float(i % 3 - 1))
                s = (t1, t2, d1, d2)
        return go
    return _best(run(fast), repeat, 1) / n, _best(run(slow), repeat, 1) / n


def bench_rtg(length, repeat):
    r = np.random.default_rng(0).normal(size=length)
    loop = rl._reward_to_go_loop
    loop(r, 0.99)
    return (
        _best(lambda: loop(r, 0.99), repeat, 20),
        _best(lambda: rl._reward_to_go_numpy(r, 0.99), repeat, 20),
        _best(lambda: python_impl(loop)(r, 0.99), repeat, 3),
    )


def end_to_end(env_name, episodes, no_jit):
    env = dict(os.environ)
    if no_jit:
        env["KFRELAX_NO_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKLOAD.format(env=env_name, episodes=episodes)],
                         capture_output=True, text=True, env=env, check=True).stdout.split()
    steps, secs = int(out[0]), float(out[1])
    return secs / steps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=20000)
    args = ap.parse_args(argv)
    if not USE_NUMBA:
        print("numba unavailable or disabled; both columns measure the Python path")

    # warm up the compiled kernels
    envs.cartpole_kernel(0.0, 0.0, 0.0, 0.0, 1)
    envs.acrobot_kernel(0.0, 0.0, 0.0, 0.0, 1.0)

    rows = []
    f, s = bench_cartpole(envs.cartpole_kernel, python_impl(envs.cartpole_kernel), args.steps, args.repeat)
    rows.append(("cartpole_kernel / step", f, s))
    f, s = bench_acrobot(envs.acrobot_kernel, python_impl(envs.acrobot_kernel), args.steps // 4, args.repeat)
    rows.append(("acrobot_kernel / step", f, s))
    for length in (200, 5000):
        f, vec, s = bench_rtg(length, args.repeat)
        rows.append((f"reward_to_go len={length} (numpy lfilter)", f, vec))
        rows.append((f"reward_to_go len={length} (python loop)", f, s))
    for name, n_ep in (("cartpole", 100), ("acrobot", 10)):
        rows.append((f"rollout {name} / step (end to end)", end_to_end(name, n_ep, False),
                     end_to_end(name, n_ep, True)))

    width = max(len(r[0]) for r in rows)
    print(f"{'benchmark':<{width}}  {'numba':>12}  {'fallback':>12}  {'speedup':>8}")
    for name, fast, slow in rows:
        print(f"{name:<{width}}  {fast * 1e6:10.3f}us  {slow * 1e6:10.3f}us  {slow / fast:7.1f}x")


if __name__ == "__main__":
    main()
