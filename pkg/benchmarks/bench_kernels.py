"""Compare the numba and numpy face-flux kernels, and time a full step.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 7]

Set ``STQG_NUMBA=0`` to time the full step on the numpy path.
"""

import argparse
import timeit

import numpy as np

from stqg import _kernels
from stqg.grid import Field, TorusSpec, perp_gradient
from stqg.noise import FourierMode, NoiseBasis
from stqg.state import State
from stqg.stepper import ModelData, StepperConfig, ssprk3_values


def random_field(spec, seed):
    rng = np.random.default_rng(seed)
    x, y = spec.coords
    out = sum(rng.normal() * np.cos(k1 * x + k2 * y + rng.uniform(0, 6.3))
              for k1, k2 in rng.integers(-8, 9, size=(12, 2)))
    return Field(spec, out - out.mean())


def best_of(stmt, repeat, number):
    return min(timeit.repeat(stmt, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    print(f"full-step backend: {_kernels.BACKEND}")
    print(f"{'grid':>6} {'degree':>6} {'numpy ms':>10} {'numba ms':>10} {'speed-up':>9} {'max diff':>9}")
    for n in args.sizes:
        spec = TorusSpec(n, n)
        u = perp_gradient(random_field(spec, 1))
        c = random_field(spec, 2).values
        number = max(1, 20000 // n)
        for degree in (0, 1):
            call = (c, u.face_x, u.face_y, spec.dx, spec.dy, degree, 1.0)
            ref = _kernels.flux_tendency_numpy(*call)
            t_np = best_of(lambda: _kernels.flux_tendency_numpy(*call), args.repeat, number)
            if _kernels.numba is not None:
                out = _kernels.flux_tendency_numba(*call)  # compile outside the timing
                t_nb = best_of(lambda: _kernels.flux_tendency_numba(*call), args.repeat, number)
                diff = float(np.abs(out - ref).max())
                print(f"{n:>6} {degree:>6} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>8.1f}x {diff:>9.1e}")
            else:
                print(f"{n:>6} {degree:>6} {t_np * 1e3:>10.3f} {'n/a':>10}")

    print()
    print(f"{'grid':>6} {'step ms':>10}")
    for n in args.sizes:
        spec = TorusSpec(n, n)
        st = State(random_field(spec, 3), random_field(spec, 4), spec.zeros())
        h = Field(spec, 0.3 * np.cos(spec.coords[1]))
        data = ModelData(spec.zeros(), h, NoiseBasis([FourierMode((1, 0), 0.3), FourierMode((0, 1), 0.3)]))
        cfg = StepperConfig(dt=1e-3)
        dw = np.array([0.01, -0.02])
        step = lambda: ssprk3_values(spec, st.b.values, st.q.values, dw, cfg, data)
        step()
        print(f"{n:>6} {best_of(step, args.repeat, max(1, 2000 // n)) * 1e3:>10.3f}")


if __name__ == "__main__":
    main()
