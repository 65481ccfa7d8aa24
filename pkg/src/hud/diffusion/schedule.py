"""Linear variance schedule and the closed-form forward/reverse step formulas.

Steps are 1-based (``t = 1..T``); the arrays are stored 0-based, so step ``t``
lives at index ``t - 1``. ``alpha_bar`` for step 0 is taken as 1, which makes
the reverse posterior at ``t = 1`` a point mass on ``Z_0``.

``q_sample`` and ``sample_step`` only use arithmetic on their array arguments,
so they work on numpy arrays and torch tensors alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    alpha_bar_prev: np.ndarray
    sigma: np.ndarray
    beta_tilde: np.ndarray
    posterior_coef_z0: np.ndarray
    posterior_coef_zt: np.ndarray
    beta_start: float
    beta_end: float

    @property
    def T(self) -> int:
        return len(self.beta)

    def check_step(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.T:
            raise ValueError(f"step t={t} outside [1, {self.T}]")
        return t - 1

    def posterior_mean(self, zt, z0, t: int):
        """Mean of ``q(Z_{t-1} | Z_t, Z_0)``."""
        i = self.check_step(t)
        return float(self.posterior_coef_z0[i]) * z0 + float(self.posterior_coef_zt[i]) * zt

    def eps_mean(self, zt, eps, t: int):
        """Reverse mean written in terms of the noise: ``(Z_t - beta/sqrt(1-abar) eps) / sqrt(alpha)``."""
        i = self.check_step(t)
        coef = float(self.beta[i] / np.sqrt(1.0 - self.alpha_bar[i]))
        return (zt - coef * eps) * float(1.0 / np.sqrt(self.alpha[i]))


def build_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear beta schedule from ``beta_start`` to ``beta_end`` over ``T`` steps."""
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    T = int(T)
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    one_minus = 1.0 - alpha_bar
    return NoiseSchedule(
        beta=beta,
        alpha=alpha,
        alpha_bar=alpha_bar,
        alpha_bar_prev=alpha_bar_prev,
        sigma=np.sqrt(beta),
        beta_tilde=(1.0 - alpha_bar_prev) / one_minus * beta,
        posterior_coef_z0=np.sqrt(alpha_bar_prev) * beta / one_minus,
        posterior_coef_zt=np.sqrt(alpha) * (1.0 - alpha_bar_prev) / one_minus,
        beta_start=float(beta_start),
        beta_end=float(beta_end),
    )


def _check_shapes(a, b):
    if tuple(a.shape) != tuple(b.shape):
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def q_sample(z0, t: int, eps, s: NoiseSchedule):
    """Draw from ``q(Z_t | Z_0)`` given the noise: ``sqrt(abar) Z_0 + sqrt(1 - abar) eps``."""
    i = s.check_step(t)
    _check_shapes(z0, eps)
    # python floats keep torch tensors as tensors
    return float(np.sqrt(s.alpha_bar[i])) * z0 + float(np.sqrt(1.0 - s.alpha_bar[i])) * eps


def sample_step(zt, t: int, eps_hat, noise, s: NoiseSchedule):
    """One ancestral step ``Z_t -> Z_{t-1}``; ``noise`` is ignored at ``t = 1``."""
    i = s.check_step(t)
    _check_shapes(zt, eps_hat)
    mean = s.eps_mean(zt, eps_hat, t)
    if i == 0:
        return mean
    _check_shapes(zt, noise)
    return mean + float(s.sigma[i]) * noise
