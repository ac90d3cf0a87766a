"""Snapshot dataset generation, windowed reduced bases, truncation errors.

The reduced state vector stacks the temperatures of all three layers
(air, PCM, glass) so one least-squares solve reconstructs every domain.
Bases are built per time window: window 1 covers the fast early transient
(t < 1080 s), window 2 the slow tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .containers import read_manifest, read_snapshot, sha256_text
from .errors import ConfigError, DomainError

WINDOW_SPLIT_S = 1080.0


@dataclass(frozen=True)
class ParameterSample:
    sample_id: int
    gs: float
    seed: int


def sample_parameters(count: int, lo: float, hi: float, seed: int):
    """Reproducible uniform irradiation samples on [lo, hi] W/m^2."""
    if count < 1:
        raise ConfigError("need at least one sample")
    if not lo < hi:
        raise ConfigError(f"degenerate sampling interval [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    values = rng.uniform(lo, hi, size=count)
    return [ParameterSample(sample_id=i, gs=float(v), seed=seed + 1 + i)
            for i, v in enumerate(values)]


def window_of(t: float) -> int:
    """Time-window tag: 1 before the split, 2 from the split onward."""
    if t < 0.0:
        raise DomainError("negative snapshot time")
    return 1 if t < WINDOW_SPLIT_S else 2


def stack_temperatures(fields: dict) -> np.ndarray:
    """State vector: T_air, T_pcm, T_glass raveled and concatenated."""
    return np.concatenate([fields["T_air"].ravel(), fields["T_pcm"].ravel(),
                           fields["T_glass"].ravel()])


def unstack_temperatures(vec: np.ndarray, dims):
    """Inverse of stack_temperatures for dims = (nx, ny_air, ny_pcm, ny_glass)."""
    nx, ny_a, ny_p, ny_g = dims
    na, np_ = ny_a * nx, ny_p * nx
    return (vec[:na].reshape(ny_a, nx),
            vec[na:na + np_].reshape(ny_p, nx),
            vec[na + np_:].reshape(ny_g, nx))


@dataclass
class SnapshotMatrix:
    """Column-stacked temperature states with per-column metadata."""

    a: np.ndarray                  # (N, K)
    times: np.ndarray              # (K,)
    run_ids: list                  # (K,)
    gs: np.ndarray                 # (K,)
    window: int
    dims: tuple

    def __post_init__(self):
        if not np.all(np.isfinite(self.a)):
            raise DomainError("snapshot matrix contains non-finite values")

    @property
    def n_columns(self) -> int:
        return self.a.shape[1]


def assemble_snapshots(run_dirs, window: int,
                       split_s: float = WINDOW_SPLIT_S) -> SnapshotMatrix:
    """Collect the window's snapshot columns from forward-run directories.

    Every run must carry a manifest listing its snapshot files and share one
    mesh. Window 1 takes t < split, window 2 takes t >= split.
    """
    from pathlib import Path

    if window not in (1, 2):
        raise ConfigError("window must be 1 or 2")
    cols, times, run_ids, gs_list = [], [], [], []
    dims = None
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        manifest = read_manifest(run_dir / "manifest.json")
        for entry in manifest["snapshots"]:
            t = float(entry["time"])
            in_window = t < split_s if window == 1 else t >= split_s
            if not in_window:
                continue
            snap = read_snapshot(run_dir / entry["file"])
            if dims is None:
                dims = snap["dims"]
            elif snap["dims"] != dims:
                raise DomainError(
                    f"mesh mismatch across runs: {snap['dims']} vs {dims}")
            cols.append(stack_temperatures(snap["fields"]))
            times.append(t)
            run_ids.append(manifest["run_id"])
            gs_list.append(snap["gs"])
    if not cols:
        raise DomainError(f"no snapshots fall inside window {window}")
    return SnapshotMatrix(a=np.column_stack(cols), times=np.array(times),
                          run_ids=run_ids, gs=np.array(gs_list),
                          window=window, dims=dims)


@dataclass
class ReducedBasis:
    """Orthonormal modes with the full singular-value spectrum."""

    phi: np.ndarray                # (N, n)
    sigma: np.ndarray              # full spectrum, non-increasing
    window: int
    dims: tuple
    manifest_hash: str = ""

    def __post_init__(self):
        if np.any(np.diff(self.sigma) > 1e-12 * self.sigma[0]):
            raise DomainError("singular values must be non-increasing")

    @property
    def n_modes(self) -> int:
        return self.phi.shape[1]


def truncated_svd(matrix: SnapshotMatrix | np.ndarray, n_modes: int,
                  center: bool = False, scale: bool = False) -> ReducedBasis:
    """First n left singular vectors plus the full spectrum.

    ``center``/``scale`` are off by default (config knobs only); when used,
    the shift/scale is the caller's responsibility to track.
    """
    if isinstance(matrix, SnapshotMatrix):
        a = matrix.a
        window, dims = matrix.window, matrix.dims
        manifest_hash = sha256_text(",".join(
            f"{r}:{t:.6f}" for r, t in zip(matrix.run_ids, matrix.times)))
    else:
        a = np.asarray(matrix, dtype=np.float64)
        window, dims, manifest_hash = 0, (0, 0, 0, 0), ""
    if n_modes <= 0:
        raise ConfigError("mode count must be positive")
    a_work = a
    if center:
        a_work = a_work - a_work.mean(axis=1, keepdims=True)
    if scale:
        norm = np.linalg.norm(a_work, axis=0, keepdims=True)
        a_work = a_work / np.where(norm > 0, norm, 1.0)
    u, s, _ = np.linalg.svd(a_work, full_matrices=False)
    n = min(n_modes, s.size)
    return ReducedBasis(phi=u[:, :n].copy(), sigma=s.copy(), window=window,
                        dims=dims, manifest_hash=manifest_hash)


def truncation_error(basis_or_sigma, n_modes: int) -> float:
    """Relative Frobenius truncation error sqrt(sum_{k>n} s_k^2 / sum s_k^2)."""
    sigma = basis_or_sigma.sigma if isinstance(basis_or_sigma, ReducedBasis) \
        else np.asarray(basis_or_sigma, dtype=np.float64)
    total = float(np.sum(sigma ** 2))
    if total == 0.0:
        raise DomainError("truncation error undefined for a zero matrix")
    if n_modes < 0:
        raise ConfigError("mode count must be non-negative")
    tail = float(np.sum(sigma[n_modes:] ** 2))
    return float(np.sqrt(tail / total))


def truncation_error_curve(basis_or_sigma, n_max: int = None) -> np.ndarray:
    sigma = basis_or_sigma.sigma if isinstance(basis_or_sigma, ReducedBasis) \
        else np.asarray(basis_or_sigma, dtype=np.float64)
    n_max = sigma.size if n_max is None else min(n_max, sigma.size)
    return np.array([truncation_error(sigma, n) for n in range(n_max + 1)])
