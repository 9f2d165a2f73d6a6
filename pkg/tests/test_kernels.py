import os
import subprocess
import sys

import numpy as np
import pytest

from banditgames._kernels import BACKEND, compiled_available, get_backend
from banditgames.algorithms import (
    run_bandit_mirror_descent,
    run_entropy_bandit_omd,
    run_optimistic_regularized_ew,
    run_time_varying,
)
from banditgames.games import NoiseSpec
from banditgames.library import make_cournot, make_matrix_game, make_time_varying_cournot
from banditgames.schedules import make_schedule

A = np.array([[1.0, 2.0], [3.0, 4.0]])
T = 3000
ETA, TAU = T ** (-7 / 12), T ** (-1 / 6)

LOOPS = {
    "cournot": lambda **kw: run_bandit_mirror_descent(make_cournot(), make_schedule("strongly_monotone_main"), T, seed=2, **kw),
    "cournot_noisy": lambda **kw: run_bandit_mirror_descent(
        make_cournot(), make_schedule("noisy", sigma=0.1), T, NoiseSpec(0.1), seed=2, **kw
    ),
    "matrix_linear": lambda **kw: run_bandit_mirror_descent(make_matrix_game(A), make_schedule("linear_tau", T=T), T, seed=2, **kw),
    "tracking": lambda **kw: run_time_varying(
        make_time_varying_cournot(amplitude=5.0, period=T), "tracking", make_schedule("tracking"), T, seed=2, **kw
    ),
    "entropy": lambda **kw: run_entropy_bandit_omd(A, ETA, TAU, TAU, T, 2, noise=NoiseSpec(0.05), **kw),
    "optimistic": lambda **kw: run_optimistic_regularized_ew(A, ETA, TAU, TAU, 0.5, T, 2, noise=NoiseSpec(0.05), **kw),
}

needs_compiled = pytest.mark.skipif(not compiled_available(), reason="compiled extension not built")


def _same(a, b):
    for x, y in zip(a.iterates + a.played, b.iterates + b.played):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(a.costs, b.costs)


@needs_compiled
@pytest.mark.parametrize("name", sorted(LOOPS))
def test_backends_agree_bitwise(name):
    _same(LOOPS[name](backend="compiled"), LOOPS[name](backend="python"))


@pytest.mark.parametrize("name", ["cournot", "cournot_noisy", "matrix_linear", "tracking"])
def test_kernel_matches_reference_loop(name):
    k = LOOPS[name](engine="kernel")
    r = LOOPS[name](engine="reference")
    assert k.info["engine"] == "kernel" and r.info["engine"] == "reference"
    for x, y in zip(k.iterates + k.played, r.iterates + r.played):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-11)
    np.testing.assert_allclose(k.costs, r.costs, rtol=0, atol=1e-11)


@pytest.mark.parametrize("name", ["entropy", "optimistic"])
def test_simplex_kernel_matches_reference_loop(name):
    k = LOOPS[name](engine="kernel")
    r = LOOPS[name](engine="reference")
    for a, b in zip(k.info["actions"], r.info["actions"]):
        np.testing.assert_array_equal(a, b)
    for x, y in zip(k.iterates, r.iterates):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", ["cournot", "entropy", "optimistic"])
def test_chunk_size_does_not_matter(name):
    _same(LOOPS[name](chunk=97), LOOPS[name]())


def test_default_backend_and_unknown_name():
    assert BACKEND in ("compiled", "python")
    assert get_backend("python").__name__.endswith("_pycore")
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_pure_python_fallback_selected_by_environment():
    env = dict(os.environ, BANDITGAMES_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from banditgames._kernels import BACKEND; print(BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
