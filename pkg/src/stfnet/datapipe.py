"""Recording ingestion, windowing, cross-subject splits, electrode graphs, synthetic data."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = ("control", "depressed")


class DataError(ValueError):
    """Malformed dataset, layout or adjacency input."""


@dataclass
class Recording:
    subject_id: str
    label: str
    sample_rate_hz: float
    samples: np.ndarray  # [V, N]

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def label_index(self):
        return LABELS.index(self.label)


@dataclass
class ElectrodeLayout:
    names: list
    positions: np.ndarray  # [V, 3]

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if len(set(self.names)) != len(self.names):
            raise DataError("electrode names must be unique")
        if self.positions.shape != (len(self.names), 3):
            raise DataError(f"positions must be [V, 3], got {self.positions.shape}")
        if not np.isfinite(self.positions).all():
            raise DataError("electrode positions must be finite")


@dataclass
class FoldPlan:
    groups: list  # ten lists of subject ids
    seed: int

    def folds(self):
        """Yield (fold index, source ids, target ids); one group is the target domain per fold."""
        for k, target in enumerate(self.groups):
            source = [s for j, g in enumerate(self.groups) if j != k for s in g]
            yield k, source, list(target)


def atomic_write(path, write):
    """Write via a temporary sibling and rename, so readers never see partial files."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        write(fh)
    os.replace(tmp, path)


# -- manifest -------------------------------------------------------------
def load_manifest(path):
    """Load every recording referenced by a ``manifest.json``."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("sample_rate_hz", "n_channels", "subjects"):
        if key not in meta:
            raise DataError(f"{path}: missing key {key!r}")
    rate = float(meta["sample_rate_hz"])
    n_ch = int(meta["n_channels"])
    if rate <= 0 or n_ch <= 0:
        raise DataError(f"{path}: sample_rate_hz and n_channels must be positive")

    recordings = []
    seen = set()
    for i, sub in enumerate(meta["subjects"]):
        where = f"{path}: subjects[{i}]"
        for key in ("id", "label", "file", "n_samples"):
            if key not in sub:
                raise DataError(f"{where}: missing key {key!r}")
        if sub["label"] not in LABELS:
            raise DataError(f"{where}: unknown label {sub['label']!r} (expected one of {LABELS})")
        sid = str(sub["id"])
        if sid in seen:
            raise DataError(f"{where}: duplicate subject id {sid!r}")
        seen.add(sid)
        fpath = path.parent / sub["file"]
        if not fpath.exists():
            raise DataError(f"{where}: data file not found: {fpath}")
        n = int(sub["n_samples"])
        raw = np.fromfile(fpath, dtype="<f4")
        if raw.size != n_ch * n:
            rows = raw.size / n if n else float("nan")
            raise DataError(
                f"{where}: shape mismatch, manifest declares [{n_ch} x {n}] "
                f"but file holds {raw.size} values ({rows:g} rows of {n})"
            )
        samples = raw.reshape(n_ch, n).astype(np.float32)
        if not np.isfinite(samples).all():
            raise DataError(f"{where}: non-finite samples in {fpath}")
        recordings.append(Recording(sid, sub["label"], rate, samples))
    return recordings


def write_dataset(directory, recordings, name="dataset"):
    """Write recordings as a manifest plus channel-major little-endian float32 files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not recordings:
        raise DataError("no recordings to write")
    rate = recordings[0].sample_rate_hz
    n_ch = recordings[0].n_channels
    subjects = []
    for rec in recordings:
        fname = f"{rec.subject_id}.f32"
        data = np.ascontiguousarray(rec.samples, dtype="<f4")
        atomic_write(directory / fname, lambda fh, d=data: fh.write(d.tobytes()))
        subjects.append({"id": rec.subject_id, "label": rec.label, "file": fname, "n_samples": rec.n_samples})
    manifest = {"dataset_name": name, "sample_rate_hz": rate, "n_channels": n_ch, "subjects": subjects}
    text = json.dumps(manifest, indent=2, sort_keys=True).encode()
    atomic_write(directory / "manifest.json", lambda fh: fh.write(text))
    return directory / "manifest.json"


# -- windowing ------------------------------------------------------------
def window_subject(samples, n_windows):
    """Cut [V, N] into ``n_windows`` contiguous windows [T, V, len], len = N // T.

    Trailing samples beyond T * len are discarded.
    """
    samples = samples.samples if isinstance(samples, Recording) else np.asarray(samples)
    if n_windows < 1:
        raise ValueError("number of windows must be positive")
    v, n = samples.shape
    if n_windows > n:
        raise DataError(f"cannot cut {n} samples into {n_windows} windows")
    length = n // n_windows
    return samples[:, : n_windows * length].reshape(v, n_windows, length).transpose(1, 0, 2).copy()


def extract_intervals(windows, ts):
    """Time-interval slices between neighbouring windows.

    windows: [..., T, V, len]. Returns (intervals [..., T-1, V, 2*ts],
    first_start [..., V, ts], last_end [..., V, ts]); interval t joins the
    last ``ts`` samples of window t with the first ``ts`` samples of window t+1.
    """
    length = windows.shape[-1]
    if ts < 1 or 2 * ts > length:
        raise ValueError(f"slice length ts={ts} too large for window length {length}")
    ends = windows[..., :-1, :, length - ts:]
    starts = windows[..., 1:, :, :ts]
    intervals = np.concatenate([ends, starts], axis=-1)
    return intervals, windows[..., 0, :, :ts].copy(), windows[..., -1, :, length - ts:].copy()


# -- folds ----------------------------------------------------------------
def tenfold_split(subject_ids, seed, n_folds=10):
    """Random partition into ``n_folds`` groups whose sizes differ by at most one.

    Exactly ``n mod n_folds`` randomly chosen groups receive one extra subject.
    """
    ids = list(subject_ids)
    n = len(ids)
    if n < n_folds:
        raise DataError(f"need at least {n_folds} subjects, got {n}")
    if len(set(ids)) != n:
        raise DataError("subject ids must be unique")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(n)]
    sizes = np.full(n_folds, n // n_folds)
    sizes[rng.choice(n_folds, n % n_folds, replace=False)] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return FoldPlan([order[bounds[k]:bounds[k + 1]] for k in range(n_folds)], seed)


# -- electrode graph ------------------------------------------------------
def load_layout(path):
    if not Path(path).is_file():
        raise DataError(f"{path}: layout file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header != ["name", "x", "y", "z"]:
            raise DataError(f"{path}: header must be name,x,y,z")
        names, pos = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields")
            try:
                pos.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            names.append(row[0].strip())
    return ElectrodeLayout(names, np.array(pos).reshape(-1, 3))


def write_layout(path, layout):
    rows = ["name,x,y,z"]
    rows += [f"{n}," + ",".join(repr(float(c)) for c in p) for n, p in zip(layout.names, layout.positions)]
    text = ("\n".join(rows) + "\n").encode()
    atomic_write(path, lambda fh: fh.write(text))


def validate_adjacency(adj, where="adjacency"):
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise DataError(f"{where}: must be a square matrix, got shape {adj.shape}")
    if not np.isin(adj, (0.0, 1.0)).all():
        raise DataError(f"{where}: entries must be 0 or 1")
    if not np.array_equal(adj, adj.T):
        raise DataError(f"{where}: matrix is not symmetric")
    return adj


def load_adjacency(path):
    try:
        adj = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return validate_adjacency(adj, str(path))


def write_adjacency(path, adj):
    adj = validate_adjacency(adj)
    text = "\n".join(",".join(str(int(v)) for v in row) for row in adj) + "\n"
    atomic_write(path, lambda fh: fh.write(text.encode()))


def build_distance_adjacency(layout=None, rule="from_file", tau=None, k=None, path=None):
    """Binary, symmetric, zero-diagonal electrode graph.

    rule="threshold": connect pairs with Euclidean distance <= tau.
    rule="k_nearest": connect each electrode to its k nearest (ties to the
    lower index), then symmetrize with logical OR.
    rule="from_file": read a 0/1 CSV verbatim.
    """
    if rule == "from_file":
        if path is None:
            raise ValueError("from_file rule needs a path")
        adj = load_adjacency(path)
        if np.any(np.diag(adj)):
            raise DataError(f"{path}: diagonal must be zero")
        return adj
    pos = layout.positions
    v = len(pos)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    if rule == "threshold":
        if tau is None or tau <= 0:
            raise ValueError("threshold rule needs tau > 0")
        adj = (dist <= tau).astype(np.float64)
    elif rule == "k_nearest":
        if k is None or not 1 <= k < v:
            raise ValueError(f"k_nearest rule needs 1 <= k < V={v}")
        d = dist + np.diag(np.full(v, np.inf))
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        adj = np.zeros((v, v))
        adj[np.repeat(np.arange(v), k), nearest.ravel()] = 1.0
        adj = np.maximum(adj, adj.T)
    else:
        raise ValueError(f"unknown adjacency rule {rule!r}")
    np.fill_diagonal(adj, 0.0)
    return adj


def ring_layout(n_channels):
    """Electrodes spread on the unit sphere along a tilted spiral; used for synthetic data."""
    i = np.arange(n_channels) + 0.5
    polar = np.arccos(1 - i / n_channels)  # upper hemisphere
    azimuth = np.pi * (1 + 5 ** 0.5) * i
    pos = np.stack([np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)], axis=1)
    return ElectrodeLayout([f"E{j + 1}" for j in range(n_channels)], pos)


# -- synthetic data -------------------------------------------------------
@dataclass
class SynthSpec:
    n_subjects: int = 12
    n_channels: int = 8
    sample_rate: float = 250.0
    duration_s: float = 16.0
    class_separation: float = 5.0
    seed: int = 0
    noise_std: float = 1.0


def synth_recordings(spec):
    """Balanced two-class recordings of band-limited oscillations plus white noise.

    Every channel carries theta (4-8 Hz) and beta (13-30 Hz) components
    shared by both classes. Alpha (8-13 Hz) amplitude is
    ``1 + class_separation * noise_std`` for depressed subjects and 1 for
    controls, so a separation of 0 makes the classes indistinguishable.
    """
    if spec.class_separation < 0:
        raise ValueError("class_separation must be >= 0")
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.sample_rate * spec.duration_s))
    t = np.arange(n) / spec.sample_rate
    labels = [LABELS[i % 2] for i in range(spec.n_subjects)]
    recs = []
    for s, label in enumerate(labels):
        alpha_amp = 1.0 + (spec.class_separation * spec.noise_std if label == "depressed" else 0.0)
        sig = np.zeros((spec.n_channels, n))
        for lo, hi, amp in ((4.0, 8.0, 1.0), (8.0, 13.0, alpha_amp), (13.0, 30.0, 0.5)):
            # a few nearby frequencies per band keep the component band-limited, not a pure tone
            for _ in range(3):
                freq = rng.uniform(lo, hi, size=(spec.n_channels, 1))
                phase = rng.uniform(0, 2 * np.pi, size=(spec.n_channels, 1))
                sig += (amp / np.sqrt(3)) * np.sin(2 * np.pi * freq * t[None, :] + phase)
        sig += rng.normal(0.0, spec.noise_std, size=sig.shape)
        recs.append(Recording(f"S{s + 1:03d}", label, spec.sample_rate, sig.astype(np.float32)))
    return recs


def synth_dataset(directory, spec, adjacency_k=2):
    """Write a synthetic dataset: manifest, data files, layout.csv and adjacency.csv."""
    directory = Path(directory)
    recs = synth_recordings(spec)
    manifest = write_dataset(directory, recs, name=f"synthetic-sep{spec.class_separation:g}-seed{spec.seed}")
    layout = ring_layout(spec.n_channels)
    write_layout(directory / "layout.csv", layout)
    k = min(adjacency_k, spec.n_channels - 1)
    if k >= 1:
        write_adjacency(directory / "adjacency.csv", build_distance_adjacency(layout, "k_nearest", k=k))
    return manifest
