"""Smoke test for the fraclap Python bindings.

Build first with ``cargo build -p fraclap-py --release``; the script loads the
shared library straight from ``target/`` when the module is not installed.
"""

import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import fraclap_py

        return fraclap_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libfraclap_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("fraclap_py", str(lib))
            spec = importlib.util.spec_from_file_location("fraclap_py", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("fraclap_py not found; run `cargo build -p fraclap-py --release` first")


def main():
    fl = load()

    p = fl.density(1.0, 1.0, [0.0])
    assert abs(p - 1.0 / math.pi) < 1e-10, p
    assert abs(fl.scaling_check(0.5, 16.0, [2.0]) - 1.0) < 1e-8
    assert abs(fl.total_mass(1.5, 2) - 1.0) < 1e-6

    grid = fl.Grid(256)
    op = fl.DirichletOperator(grid, 1.0)
    c = fl.getoor_constant(1.0, 1)
    u = op.solve_elliptic([-c] * len(grid))
    exact = [math.sqrt(1.0 - x * x) for x in grid.nodes]
    err = max(abs(a - b) for a, b in zip(u, exact))
    assert err < 1e-2, err
    kappa = op.boundary_decay(u)
    assert abs(kappa - 0.5) < 0.05, kappa

    times, values = op.solve_parabolic([0.0] * len(grid), [1.0] * len(grid), 1.0, 32)
    assert len(times) == 33 and len(values[-1]) == len(grid)
    assert op.weighted_lp_norm(values[-1], 2.0, 1.0, -0.5) > 0.0

    stats = fl.exit_time(1.0, n_paths=4000, dt=1e-3, seed=7)
    oracle = fl.expected_exit_time(1.0, 1)
    assert abs(stats["mean"] - oracle) < 4 * stats["std_err"] + 0.03, stats

    passed, report = fl.verify("getoor")
    assert passed, report
    assert json.loads(report)["getoor"]["criteria"]

    try:
        fl.Grid(16, 1.0, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("reversed interval accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
