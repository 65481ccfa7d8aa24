"""Linear unmixing: VCA endmember extraction, abundance solvers and the frozen
linear autoencoder that maps cubes to abundance fields and back.

Array conventions: an endmember matrix ``A`` is ``(c, d)`` with one spectrum per
column; abundance and coefficient fields are ``(d, h, w)``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .io import HsiCube, load_cube, save_cube

logger = logging.getLogger(__name__)

NONNEG_TOL = 1e-9
UNITY_TOL = 1e-6
MAX_CONDITION = 1e12


class RankDeficientError(ValueError):
    pass


def check_endmembers(A) -> np.ndarray:
    """Validate an endmember matrix and return it as float64."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"endmember matrix must be 2-D, got shape {A.shape}")
    c, d = A.shape
    if d < 2 or c < d:
        raise ValueError(f"need d >= 2 and c >= d, got c={c}, d={d}")
    if not np.all(np.isfinite(A)):
        raise ValueError("endmember matrix contains non-finite values")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-8 * sv[0]:
        raise RankDeficientError("endmember matrix is not full column rank")
    return A


def check_abundances(x, nonneg_tol: float = NONNEG_TOL, unity_tol: float = UNITY_TOL):
    """Raise ``ValueError`` unless every pixel of ``x`` (axis -3 = endmembers) is on the simplex."""
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("abundances contain non-finite values")
    low = x.min()
    if low < -nonneg_tol:
        raise ValueError(f"abundance below zero: {low:.3g}")
    dev = np.abs(x.sum(axis=-3) - 1.0).max()
    if dev > unity_tol:
        raise ValueError(f"abundances do not sum to one (max deviation {dev:.3g})")


def project_to_simplex(v, axis: int = -1) -> np.ndarray:
    """Euclidean projection onto the probability simplex along ``axis``.

    Sort-based exact projection: with ``u`` sorted descending, find the largest
    ``k`` with ``u_k - (sum_{j<=k} u_j - 1)/k > 0`` and shift by that threshold.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite values onto the simplex")
    moved = np.moveaxis(v, axis, -1)
    d = moved.shape[-1]
    u = -np.sort(-moved, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, d + 1)
    cond = u - css / k > 0
    rho = d - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    out = np.maximum(moved - theta, 0.0)
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# Vertex component analysis
# ---------------------------------------------------------------------------

def _estimate_snr(Y: np.ndarray, mean: np.ndarray, x_proj: np.ndarray) -> float:
    L, N = Y.shape
    p = x_proj.shape[0]
    p_y = np.sum(Y**2) / N
    p_x = np.sum(x_proj**2) / N + np.sum(mean**2)
    num = p_x - p / L * p_y
    den = p_y - p_x
    if den <= 0:
        return np.inf
    if num <= 0:
        return -np.inf
    return float(10.0 * np.log10(num / den))


def vca(cube: HsiCube, d: int, seed: int = 0, return_indices: bool = False):
    """Extract ``d`` endmembers with Vertex Component Analysis.

    The returned columns are actual pixel spectra of ``cube``. The data are
    projected onto a ``d``-dimensional signal subspace (projective projection)
    when the estimated SNR exceeds ``15 + 10 log10(d)`` dB, otherwise onto the
    ``d - 1`` dimensional subspace of the mean-removed data. Endmembers are then
    picked one at a time as the pixel with the largest absolute projection on a
    random direction orthogonal to those already chosen.

    Args:
        cube: scene to unmix.
        d: number of endmembers.
        seed: seed for the random search directions.
        return_indices: also return the flat pixel indices that were selected.

    Returns:
        ``(c, d)`` endmember matrix, optionally with the pixel indices.
    """
    Y = cube.pixels()
    L, N = Y.shape
    if d < 2:
        raise ValueError("d must be >= 2")
    if d > N:
        raise ValueError(f"d={d} exceeds the number of pixels ({N})")
    if d > L:
        raise ValueError(f"d={d} exceeds the number of bands ({L})")
    if np.linalg.matrix_rank(Y) < d:
        raise RankDeficientError(f"pixel matrix has rank < d={d}")

    rng = np.random.default_rng(seed)
    mean = Y.mean(axis=1, keepdims=True)
    Y0 = Y - mean
    # the SNR estimate works on mean-removed data
    U0 = np.linalg.svd(Y0 @ Y0.T / N, hermitian=True)[0][:, :d]
    x_p = U0.T @ Y0
    snr = _estimate_snr(Y, mean, x_p)
    snr_th = 15.0 + 10.0 * np.log10(d)

    if snr < snr_th:
        x = x_p[: d - 1]
        scale = np.sqrt(np.max(np.sum(x**2, axis=0)))
        proj = np.vstack([x, np.full((1, N), scale)])
    else:
        Ud = np.linalg.svd(Y @ Y.T / N, hermitian=True)[0][:, :d]
        x = Ud.T @ Y
        u = x.mean(axis=1, keepdims=True)
        denom = np.sum(x * u, axis=0)
        proj = x / denom
    logger.debug("vca: estimated SNR %.2f dB (threshold %.2f)", snr, snr_th)

    indices = np.zeros(d, dtype=int)
    basis = np.zeros((d, d))
    basis[-1, 0] = 1.0
    for i in range(d):
        w = rng.standard_normal(d)
        f = w - basis @ (np.linalg.pinv(basis) @ w)
        f /= np.linalg.norm(f)
        v = f @ proj
        indices[i] = int(np.argmax(np.abs(v)))
        basis[:, i] = proj[:, indices[i]]

    A = Y[:, indices]
    if return_indices:
        return A, indices
    return A


# ---------------------------------------------------------------------------
# Abundance solvers
# ---------------------------------------------------------------------------

def _pixels_for(A: np.ndarray, cube) -> tuple[np.ndarray, tuple[int, int]]:
    data = cube.data if isinstance(cube, HsiCube) else np.asarray(cube)
    if data.ndim == 1:
        data = data[:, None, None]
    if data.shape[0] != A.shape[0]:
        raise ValueError(f"cube has {data.shape[0]} bands, endmembers have {A.shape[0]}")
    return data.reshape(data.shape[0], -1).astype(np.float64), data.shape[1:]


def solve_abundance_linear(A, cube) -> np.ndarray:
    """Unconstrained least-squares coefficients ``(A^T A)^{-1} A^T Y``, shape ``(d, h, w)``."""
    A = check_endmembers(A)
    Y, hw = _pixels_for(A, cube)
    gram = A.T @ A
    cond = np.linalg.cond(gram)
    if not cond < MAX_CONDITION:
        raise np.linalg.LinAlgError(f"A^T A is ill-conditioned (cond={cond:.3g})")
    X = np.linalg.solve(gram, A.T @ Y)
    return X.reshape(A.shape[1], *hw)


class FclsInfo(NamedTuple):
    iterations: np.ndarray
    converged: np.ndarray
    objective: np.ndarray


def _objective(A, X, Y):
    r = Y - A @ X
    return np.einsum("ij,ij->j", r, r)


def solve_abundance_fcls(
    A,
    cube,
    tol: float = 1e-12,
    max_iter: int = 2000,
    return_info: bool = False,
):
    """Fully constrained least squares: ``min ||y - A x||^2`` with ``x`` on the simplex.

    Accelerated projected gradient (step ``1 / lambda_max(A^T A)``) with an
    objective-based momentum restart, warm-started at the simplex projection of
    the unconstrained solution. A pixel stops once a non-restart step lowers its
    objective by less than ``tol``. Pixels that hit ``max_iter`` keep their best
    iterate and are logged as not converged.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    A = check_endmembers(A)
    Y, hw = _pixels_for(A, cube)
    d, n = A.shape[1], Y.shape[1]
    gram = A.T @ A
    aty = A.T @ Y
    lip = np.linalg.eigvalsh(gram)[-1]

    X = project_to_simplex(np.linalg.lstsq(A, Y, rcond=None)[0], axis=0)
    f = _objective(A, X, Y)
    best, best_f = X.copy(), f.copy()
    momentum = X.copy()
    t_k = np.ones(n)
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=int)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Mk = momentum[:, idx]
        grad = gram @ Mk - aty[:, idx]
        X_new = project_to_simplex(Mk - grad / lip, axis=0)
        f_new = _objective(A, X_new, Y[:, idx])
        iters[idx] += 1

        improved = f_new < best_f[idx]
        best[:, idx[improved]] = X_new[:, improved]
        best_f[idx[improved]] = f_new[improved]

        restart = f_new > f[idx]
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k[idx] ** 2))
        beta = np.where(restart, 0.0, (t_k[idx] - 1.0) / t_next)
        X_old = X[:, idx]
        momentum[:, idx] = X_new + beta * (X_new - X_old)
        t_k[idx] = np.where(restart, 1.0, t_next)

        done = (~restart) & (f[idx] - f_new < tol)
        X[:, idx] = X_new
        f[idx] = f_new
        active[idx[done]] = False

    if active.any():
        logger.warning(
            "fcls: %d of %d pixels did not converge in %d iterations",
            int(active.sum()), n, max_iter,
        )
    out = best.reshape(d, *hw)
    if return_info:
        return out, FclsInfo(iters.reshape(hw), (~active).reshape(hw), best_f.reshape(hw))
    return out


# ---------------------------------------------------------------------------
# Frozen linear autoencoder
# ---------------------------------------------------------------------------

@dataclass
class UnmixingAutoencoder:
    """Linear encoder/decoder pair built from an endmember matrix.

    The decoder is ``A``; the encoder is its left pseudo-inverse
    ``E = (A^T A)^{-1} A^T``. ``frozen`` stays True unless a caller explicitly
    opts into fine-tuning; training refuses unfrozen autoencoders.
    """

    A: np.ndarray
    frozen: bool = True
    E: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.A = check_endmembers(self.A)
        gram = self.A.T @ self.A
        if not np.linalg.cond(gram) < MAX_CONDITION:
            raise np.linalg.LinAlgError("A^T A is ill-conditioned")
        self.E = np.linalg.solve(gram, self.A.T)
        err = np.abs(self.E @ self.A - np.eye(self.d)).max()
        if err > 1e-6:
            raise np.linalg.LinAlgError(f"encoder is not a left inverse (error {err:.3g})")

    @property
    def bands(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]


def encode(uae: UnmixingAutoencoder, cube, mode: str = "linear", **fcls_kwargs) -> np.ndarray:
    """Map a cube to a ``(d, h, w)`` abundance field on the simplex.

    ``mode="linear"`` applies the encoder then projects each pixel onto the
    simplex; ``mode="fcls"`` runs :func:`solve_abundance_fcls`.
    """
    if mode == "fcls":
        return solve_abundance_fcls(uae.A, cube, **fcls_kwargs)
    if mode != "linear":
        raise ValueError(f"unknown encode mode {mode!r}")
    Y, hw = _pixels_for(uae.A, cube)
    X = project_to_simplex(uae.E @ Y, axis=0)
    return X.reshape(uae.d, *hw)


def decode(uae: UnmixingAutoencoder, x) -> HsiCube:
    """Reconstruct ``A x`` pixelwise from a ``(d, h, w)`` field."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != uae.d:
        raise ValueError(f"expected a ({uae.d}, h, w) field, got {x.shape}")
    return HsiCube(np.tensordot(uae.A, x, axes=(1, 0)))


class ReconstructionReport(NamedTuple):
    rmse: float
    mean_spectral_angle: float


def spectral_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel angle between two ``(c, ...)`` arrays; zero-norm pairs give pi/2."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    num = np.sum(a * b, axis=0)
    den = np.linalg.norm(a, axis=0) * np.linalg.norm(b, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(den > 0, num / den, 0.0)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def reconstruction_report(y: HsiCube, y_hat: HsiCube) -> ReconstructionReport:
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    a = y.data.astype(np.float64)
    b = y_hat.data.astype(np.float64)
    rmse = float(np.sqrt(np.mean((a - b) ** 2)))
    return ReconstructionReport(rmse, float(spectral_angles(a, b).mean()))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_endmembers(A, path, seed: int | None = None, mode: str = "vca") -> None:
    """Store ``A`` as an HSC1 cube with ``h=d, w=1`` plus a JSON sidecar."""
    A = check_endmembers(A)
    save_cube(HsiCube(A[:, :, None]), path)
    meta = {"d": A.shape[1], "seed": seed, "mode": mode}
    sidecar_path(path).write_text(json.dumps(meta) + "\n", encoding="utf-8")


def load_endmembers(path) -> tuple[np.ndarray, dict]:
    cube = load_cube(path)
    if cube.width != 1:
        raise ValueError(f"{path}: endmember file must have width 1")
    side = sidecar_path(path)
    meta = json.loads(side.read_text(encoding="utf-8")) if side.is_file() else {}
    if meta and meta.get("d") != cube.height:
        raise ValueError(f"{side}: sidecar d={meta.get('d')} disagrees with file ({cube.height})")
    return check_endmembers(cube.data[:, :, 0]), meta
