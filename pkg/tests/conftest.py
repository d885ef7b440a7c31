import math

import numpy as np
import pytest

from imumatch.features import Descriptor, FeaturePoint, Frame
from imumatch.predictor import Prediction, PredictionStatus
from imumatch.kernels import available_backends
from imumatch.synth import generate_scene, preset_config

BACKENDS = available_backends()


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def scenes():
    """Noiseless preset scenes, generated once per session."""
    cache = {}

    def get(name, seed=0, **kw):
        key = (name, seed, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = generate_scene(preset_config(name, seed=seed, **kw))
        return cache[key]

    return get


def random_frame(rng, n, t=0.0, width=640, height=480, nbytes=8, ids=None):
    ids = list(range(n)) if ids is None else ids
    feats = [FeaturePoint(int(i), float(rng.uniform(0, width)), float(rng.uniform(0, height)),
                          float(rng.uniform(1000, 20000)), Descriptor.binary(rng.bytes(nbytes)))
             for i in ids]
    return Frame(t, width, height, feats)


def rotation_about(axis, angle):
    """Active rotation about a unit axis (Rodrigues)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def hamming_ref(a: bytes, b: bytes) -> int:
    return sum(bin(x ^ y).count("1") for x, y in zip(a, b))


def linear_scan_reference(source, target, preds, params):
    """Windowed matching by scanning every target; shares only the acceptance rule."""
    pairs = set()
    gate = params.gate(source.features[0].descriptor.length) if source.features else 0
    for f, p in zip(source.features, preds):
        if p.status not in (PredictionStatus.OK, PredictionStatus.OUT_OF_FRAME):
            continue
        t = params.threshold
        cands = [q for q in target.features
                 if p.u - t < q.u < p.u + t and p.v - t < q.v < p.v + t]
        scored = sorted((hamming_ref(f.descriptor.data, q.descriptor.data), q.id) for q in cands)
        if not scored:
            continue
        best, tid = scored[0]
        if best > gate:
            continue
        if params.ratio is not None and len(scored) > 1 and not best < params.ratio * scored[1][0]:
            continue
        pairs.add((f.id, tid))
    return pairs


def perturbed_pair(rng, n, m, nbytes=8, jitter=6.0, flips=3):
    """Source/target frames where target features are noisy copies near their sources."""
    src = random_frame(rng, n, nbytes=nbytes)
    tfeats = []
    ids = rng.permutation(max(n, m) + 20)[:m]
    for k, tid in enumerate(ids):
        if k < n and rng.random() < 0.7:
            s = src.features[k]
            data = bytearray(s.descriptor.data)
            for bit in rng.choice(8 * nbytes, size=flips, replace=False):
                data[bit // 8] ^= 1 << (bit % 8)
            u = float(np.clip(s.u + rng.normal(0, jitter), 0, 639.999))
            v = float(np.clip(s.v + rng.normal(0, jitter), 0, 479.999))
            tfeats.append(FeaturePoint(int(tid), u, v, s.d, Descriptor.binary(bytes(data))))
        else:
            tfeats.append(FeaturePoint(int(tid), float(rng.uniform(0, 640)), float(rng.uniform(0, 480)),
                                       1000.0, Descriptor.binary(rng.bytes(nbytes))))
    tgt = Frame(0.1, 640, 480, tfeats)
    ok = PredictionStatus.OK
    statuses = [ok, ok, ok, PredictionStatus.OUT_OF_FRAME, PredictionStatus.INVALID_DEPTH]
    preds = [Prediction(f.id, f.u + rng.normal(0, 3), f.v + rng.normal(0, 3),
                        statuses[rng.integers(len(statuses))]) for f in src.features]
    return src, tgt, preds
