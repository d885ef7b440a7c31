import os
import subprocess
import sys

import numpy as np
import pytest

from imumatch import kernels


def _backend_in_subprocess(value):
    env = dict(os.environ)
    env["IMUMATCH_BACKEND"] = value
    proc = subprocess.run([sys.executable, "-c", "from imumatch.kernels import BACKEND; print(BACKEND)"],
                          env=env, capture_output=True, text=True, check=True)
    return proc.stdout.strip(), proc.stderr


def test_env_forces_python_fallback():
    assert _backend_in_subprocess("python")[0] == "python"


def test_unknown_backend_falls_back_with_warning():
    name, err = _backend_in_subprocess("fortran")
    assert name == "python" and "unavailable" in err


def test_default_prefers_compiled():
    expected = "cython" if "cython" in kernels.available_backends() else "python"
    assert _backend_in_subprocess("")[0] == expected


def test_get_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_grid_kernels_agree():
    if "cython" not in kernels.available_backends():
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(0)
    for m in (0, 1, 7, 300):
        uv = np.ascontiguousarray(rng.uniform(-30, 700, size=(m, 2)))
        a = kernels.get_backend("cython").grid(uv, 10.0)
        b = kernels.get_backend("python").grid(uv, 10.0)
        assert a[:4] == b[:4]
        np.testing.assert_array_equal(a[4], b[4])
        np.testing.assert_array_equal(a[5], b[5])


def test_grid_too_large_is_rejected(backend):
    from imumatch.errors import InvalidArgumentError
    from imumatch.features import Descriptor, FeaturePoint, Frame
    from imumatch.matcher import build_grid
    frame = Frame(0, 640, 480, [FeaturePoint(0, 0.0, 0.0, 1.0, Descriptor.binary(b"\0")),
                                FeaturePoint(1, 1e9, 1e9, 1.0, Descriptor.binary(b"\0"))])
    with pytest.raises(InvalidArgumentError):
        build_grid(frame, 10.0, backend=backend)
    bad = Frame(0, 640, 480, [FeaturePoint(0, float("nan"), 0.0, 1.0, Descriptor.binary(b"\0"))])
    with pytest.raises(InvalidArgumentError):
        build_grid(bad, 10.0, backend=backend)


@pytest.mark.parametrize("seed", range(6))
def test_raw_kernel_outputs_agree(seed):
    if "cython" not in kernels.available_backends():
        pytest.skip("compiled extension not built")
    from conftest import perturbed_pair
    from imumatch.matcher import build_grid
    rng = np.random.default_rng(seed)
    src, tgt, preds = perturbed_pair(rng, 40, 45, nbytes=2, flips=1)
    sp, tp = src.packed, tgt.packed
    pred = np.array([(p.u, p.v) for p in preds])
    rows = np.arange(len(preds), dtype=np.int64)
    g = build_grid(tgt, 12.0)
    outs = []
    for name in ("cython", "python"):
        k = kernels.get_backend(name)
        outs.append((k.brute_force(sp.desc, tp.desc, tp.ids, rows),
                     k.windowed(pred, rows, tp.uv, sp.desc, tp.desc, tp.ids, 12.0,
                                g.i0, g.j0, g.nx, g.ny, g.cell_start, g.order)))
    for a, b in zip(*outs):
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
