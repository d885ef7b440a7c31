"""Text formats for recorded (or replayed synthetic) data.

All files are whitespace-separated, one record per line, ``#`` starts a
comment line, in the style of the TUM RGB-D logs:

``imu.txt``
    ``timestamp ax ay az [gx gy gz]``
``groundtruth.txt``
    ``timestamp tx ty tz qx qy qz qw`` (camera-to-world pose)
``features/<timestamp>.txt``
    ``id u v d descriptor`` where the descriptor is one hex token (binary)
    or a run of floats (real). An optional header comment
    ``# timestamp=<t> width=<w> height=<h>`` carries frame metadata.
``manifest.txt``
    ``key=value`` lines: imu, groundtruth, features_dir, fx, fy, cx, cy, s,
    tolerance, plus the optional width, height, truth and name.

Synthetic scenes additionally get a ``truth.json`` sidecar holding the world
points and per-frame feature-to-point tables used for scoring.
"""
from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AssociationError, EmptyDatasetError, ParseError
from .features import Descriptor, DescriptorKind, FeaturePoint, Frame
from .geometry import CameraIntrinsics, EulerAngles, Quaternion, euler_to_quaternion
from .imu_state import ImuSample
from .synth import GroundTruth, Scene

DEFAULT_TOLERANCE = 0.02
_HEX = re.compile(r"^[0-9a-fA-F]+$")


def _fmt(x) -> str:
    return repr(float(x))


def _records(path: Path):
    """Yield ``(line_number, tokens)`` for non-blank, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            yield lineno, s.split()


def _floats(tokens, lineno, path):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno, path=path) from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError("non-finite value", line=lineno, path=path)
    return vals


def load_imu(path) -> list[ImuSample]:
    path = Path(path)
    by_time: dict[float, ImuSample] = {}
    missing_gyro = False
    for lineno, tok in _records(path):
        if len(tok) not in (4, 7):
            raise ParseError(f"expected 4 or 7 columns, got {len(tok)}", line=lineno, path=path)
        vals = _floats(tok, lineno, path)
        if len(vals) == 4:
            missing_gyro = True
            gyro = (0.0, 0.0, 0.0)
        else:
            gyro = vals[4:7]
        if vals[0] < 0:
            raise ParseError("negative timestamp", line=lineno, path=path)
        by_time[vals[0]] = ImuSample(vals[0], gyro, vals[1:4])  # later line wins
    if not by_time:
        raise EmptyDatasetError(f"{path}: no IMU samples")
    if missing_gyro:
        warnings.warn(f"{path}: gyro columns missing, angular rate set to zero", stacklevel=2)
    return [by_time[t] for t in sorted(by_time)]


def write_imu(samples, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# timestamp ax ay az gx gy gz\n")
        for s in samples:
            fh.write(" ".join(_fmt(x) for x in (s.t, *s.accel, *s.omega)) + "\n")


def load_groundtruth(path) -> list[tuple[float, np.ndarray, Quaternion]]:
    path = Path(path)
    out = []
    for lineno, tok in _records(path):
        if len(tok) != 8:
            raise ParseError(f"expected 8 columns, got {len(tok)}", line=lineno, path=path)
        t, tx, ty, tz, qx, qy, qz, qw = _floats(tok, lineno, path)
        try:
            q = Quaternion(qw, qx, qy, qz).normalized()
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
        out.append((t, np.array([tx, ty, tz]), q))
    out.sort(key=lambda r: r[0])
    return out


def write_groundtruth(truth: GroundTruth, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for t, theta, pos in zip(truth.timestamps, truth.orientations, truth.positions):
            q = euler_to_quaternion(theta)
            fh.write(" ".join(_fmt(x) for x in (t, *pos, q.x, q.y, q.z, q.w)) + "\n")


def feature_filename(timestamp: float) -> str:
    return f"{timestamp:.6f}.txt"


def _parse_header(line: str) -> dict[str, str]:
    return dict(kv.split("=", 1) for kv in line.lstrip("#").split() if "=" in kv)


def parse_feature_file(path, width: int = 640, height: int = 480, timestamp: float | None = None) -> Frame:
    path = Path(path)
    meta = {}
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        meta = _parse_header(first)
    if timestamp is None:
        timestamp = float(meta.get("timestamp", path.stem))
    else:
        timestamp = float(meta.get("timestamp", timestamp))
    width = int(meta.get("width", width))
    height = int(meta.get("height", height))

    feats = []
    kind = length = None
    for lineno, tok in _records(path):
        if len(tok) < 5:
            raise ParseError("expected 'id u v d descriptor'", line=lineno, path=path)
        try:
            fid = int(tok[0])
        except ValueError:
            raise ParseError(f"bad feature id {tok[0]!r}", line=lineno, path=path) from None
        u, v, d = _floats(tok[1:4], lineno, path)
        rest = tok[4:]
        if len(rest) == 1 and len(rest[0]) % 2 == 0 and _HEX.match(rest[0]):
            desc = Descriptor.binary(bytes.fromhex(rest[0]))
        else:
            desc = Descriptor.real(_floats(rest, lineno, path))
        if kind is None:
            kind, length = desc.kind, desc.length
        elif desc.kind is not kind or desc.length != length:
            raise ParseError(
                f"descriptor {desc.kind.value}/{desc.length} differs from first line's {kind.value}/{length}",
                line=lineno, path=path)
        feats.append(FeaturePoint(fid, u, v, d, desc))
    try:
        return Frame(timestamp, width, height, feats)
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def list_feature_files(directory) -> list[tuple[float, Path]]:
    out = []
    for p in Path(directory).glob("*.txt"):
        try:
            out.append((float(p.stem), p))
        except ValueError:
            continue
    out.sort(key=lambda r: r[0])
    return out


def load_features(directory, frame_timestamp: float, tolerance: float = DEFAULT_TOLERANCE,
                  width: int = 640, height: int = 480) -> Frame:
    """Load the feature file whose name is nearest ``frame_timestamp``."""
    files = list_feature_files(directory)
    if not files:
        raise AssociationError(f"no feature files in {directory}")
    t, path = min(files, key=lambda r: (abs(r[0] - frame_timestamp), r[0]))
    if abs(t - frame_timestamp) > tolerance:
        raise AssociationError(
            f"no feature file within {tolerance} s of t={frame_timestamp} (nearest {t})")
    return parse_feature_file(path, width, height)


def _descriptor_text(d: Descriptor) -> str:
    if d.kind is DescriptorKind.BINARY:
        return d.data.hex()
    return " ".join(_fmt(x) for x in d.data)


def write_features(frame: Frame, directory) -> Path:
    path = Path(directory) / feature_filename(frame.timestamp)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# timestamp={_fmt(frame.timestamp)} width={frame.width} height={frame.height}\n")
        for f in frame.features:
            fh.write(f"{f.id} {_fmt(f.u)} {_fmt(f.v)} {_fmt(f.d)} {_descriptor_text(f.descriptor)}\n")
    return path


def truth_to_json(truth: GroundTruth) -> dict:
    k = truth.intrinsics
    return {
        "timestamps": list(truth.timestamps),
        "orientations": [list(o) for o in truth.orientations],
        "positions": truth.positions.tolist(),
        "points": truth.points.tolist(),
        "frame_points": [fp.tolist() for fp in truth.frame_points],
        "intrinsics": [k.fx, k.fy, k.cx, k.cy, k.s],
        "width": truth.width,
        "height": truth.height,
    }


def truth_from_json(data: dict) -> GroundTruth:
    return GroundTruth(
        tuple(data["timestamps"]),
        tuple(EulerAngles(*o) for o in data["orientations"]),
        np.array(data["positions"], dtype=float).reshape(-1, 3),
        np.array(data["points"], dtype=float).reshape(-1, 3),
        tuple(np.array(fp, dtype=np.int64) for fp in data["frame_points"]),
        CameraIntrinsics(*data["intrinsics"]),
        int(data["width"]),
        int(data["height"]),
    )


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    imu_file: Path
    features_dir: Path
    intrinsics: CameraIntrinsics
    groundtruth_file: Path | None = None
    tolerance: float = DEFAULT_TOLERANCE
    width: int = 640
    height: int = 480
    truth_file: Path | None = None
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.root.name


_REQUIRED = ("imu", "features_dir", "fx", "fy", "cx", "cy", "s")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest {path} does not exist")
    kv = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ParseError("expected key=value", line=lineno, path=path)
            key, value = (x.strip() for x in s.split("=", 1))
            kv[key] = value
    missing = [k for k in _REQUIRED if k not in kv]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}", path=path)
    root = path.parent

    def rel(key):
        return root / kv[key] if kv.get(key) else None

    try:
        k = CameraIntrinsics(*(float(kv[x]) for x in ("fx", "fy", "cx", "cy", "s")))
        m = DatasetManifest(
            root=root, imu_file=rel("imu"), features_dir=rel("features_dir"), intrinsics=k,
            groundtruth_file=rel("groundtruth"), tolerance=float(kv.get("tolerance", DEFAULT_TOLERANCE)),
            width=int(kv.get("width", 640)), height=int(kv.get("height", 480)),
            truth_file=rel("truth"), name=kv.get("name"))
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None
    for f in (m.imu_file, m.groundtruth_file, m.truth_file):
        if f is not None and not f.is_file():
            raise FileNotFoundError(f"{path}: referenced file {f} does not exist")
    if not m.features_dir.is_dir():
        raise FileNotFoundError(f"{path}: features_dir {m.features_dir} does not exist")
    return m


def write_manifest(path, *, imu, features_dir, intrinsics: CameraIntrinsics, groundtruth=None,
                   tolerance=DEFAULT_TOLERANCE, width=640, height=480, truth=None, name=None):
    lines = [f"imu={imu}", f"features_dir={features_dir}"]
    if groundtruth:
        lines.append(f"groundtruth={groundtruth}")
    if truth:
        lines.append(f"truth={truth}")
    k = intrinsics
    lines += [f"fx={_fmt(k.fx)}", f"fy={_fmt(k.fy)}", f"cx={_fmt(k.cx)}", f"cy={_fmt(k.cy)}",
              f"s={_fmt(k.s)}", f"tolerance={_fmt(tolerance)}", f"width={width}", f"height={height}"]
    if name:
        lines.append(f"name={name}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class Dataset:
    manifest: DatasetManifest
    imu: list[ImuSample]
    frames: list[Frame]
    truth: GroundTruth | None = None

    @property
    def name(self) -> str:
        return self.manifest.label


def load_dataset(manifest_path) -> Dataset:
    m = load_manifest(manifest_path)
    imu = load_imu(m.imu_file)
    frames = [parse_feature_file(p, m.width, m.height, t) for t, p in list_feature_files(m.features_dir)]
    frames.sort(key=lambda f: f.timestamp)
    truth = None
    if m.truth_file is not None:
        truth = truth_from_json(json.loads(m.truth_file.read_text(encoding="utf-8")))
    return Dataset(m, imu, frames, truth)


def write_scene(scene: Scene, out_dir, name: str | None = None) -> Path:
    """Write ``scene`` in the formats above and return the manifest path."""
    out = Path(out_dir)
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    for stale in feat_dir.glob("*.txt"):
        stale.unlink()
    write_imu(scene.imu, out / "imu.txt")
    write_groundtruth(scene.truth, out / "groundtruth.txt")
    for frame in scene.frames:
        write_features(frame, feat_dir)
    (out / "truth.json").write_text(json.dumps(truth_to_json(scene.truth)), encoding="utf-8")
    manifest = out / "manifest.txt"
    t = scene.truth
    write_manifest(manifest, imu="imu.txt", features_dir="features", intrinsics=t.intrinsics,
                   groundtruth="groundtruth.txt", width=t.width, height=t.height,
                   truth="truth.json", name=name)
    return manifest
