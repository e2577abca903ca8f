"""Imputation inference.

The sampler walks a step plan (reverse traversal of a skip subset, with
optional retrace jumps) over a masked table.  On every denoising step the
known region is re-sampled by forward-diffusing the observations to the
target level, the unknown region is advanced by the reverse step (ancestral
on the dense plan, skip-step otherwise), and the two are blended by the
mask.  Retrace entries in the plan re-noise the whole state forward.  The
final output carries the raw observed values verbatim at known entries.

When the network was trained on a longer time axis than the sampler runs
(e.g. 1000 vs 500), the integer step fed to the network is rescaled by
T_train / T_sample so the time conditioning stays in distribution; the
cosine schedule's noise levels depend only on t/T, which makes the two
axes line up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .denoisers import Denoiser
from .rng import Rng, derive_seed
from .schedule import (
    DiffusionSchedule,
    StepPlan,
    build_cosine_schedule,
    ddim_sigma,
    harmonization_plan,
    skip_seq,
)
from .tensor import no_grad


@dataclass(frozen=True)
class SamplerOptions:
    """Everything the sampling stage parameterizes."""

    t_sampling: int = 500
    tau: int | None = None  # skip-subset length; None = dense ancestral walk
    skip_type: str = "uniform"
    eta: float = 0.0
    jump_length: int = 1
    jump_n_sample: int = 1  # retrace depth j; 1 = no retracing
    n_mask_seeds: int = 5
    n_inferences: int = 5
    seed: int = 0
    # Clean-state clamp applied inside every reverse step; keeps the walk
    # bounded even for an untrained network.  None disables it.
    clip_x0: tuple[float, float] | None = (-1.0, 2.0)

    def __post_init__(self):
        if self.t_sampling < 1:
            raise ValueError("t_sampling must be >= 1")
        if self.tau is not None and not 1 <= self.tau <= self.t_sampling:
            raise ValueError("tau must lie in [1, t_sampling]")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.jump_length < 1 or self.jump_n_sample < 1:
            raise ValueError("jump parameters must be >= 1")
        if self.n_inferences < 1 or self.n_mask_seeds < 1:
            raise ValueError("ensemble counts must be >= 1")
        if self.clip_x0 is not None and not self.clip_x0[0] < self.clip_x0[1]:
            raise ValueError("clip_x0 bounds must be ordered")


@dataclass
class MaskedTable:
    """Observed table plus Boolean mask (True = known); scaler rides along."""

    x_obs: np.ndarray
    mask: np.ndarray
    scaler: object | None = None

    def __post_init__(self):
        self.x_obs = np.asarray(self.x_obs, dtype=np.float64)
        self.mask = np.asarray(self.mask)
        if self.mask.dtype != np.bool_:
            if not np.all(np.isin(self.mask, (0, 1))):
                raise ValueError("mask must be Boolean")
            self.mask = self.mask.astype(bool)
        if self.x_obs.shape != self.mask.shape:
            raise ValueError("observations and mask must share a shape")
        if not np.all(np.isfinite(self.x_obs[self.mask])):
            raise ValueError("known entries must be finite")

    @property
    def n_missing(self) -> int:
        return int((~self.mask).sum())


# -- single-step operations -------------------------------------------------


def noisy_known(sched: DiffusionSchedule, x0: np.ndarray, level: int, eps: np.ndarray) -> np.ndarray:
    """Observations forward-diffused to ``level``; level 0 returns x0 exactly."""
    abar = sched.alpha_bar_at(level)
    return math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * eps


def known_sample(sched: DiffusionSchedule, x0: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    """Known-region sample for the state one step below t."""
    if t < 1:
        raise IndexError("t must be >= 1")
    return noisy_known(sched, x0, t - 1, eps)


def _clip_state_estimate(
    sched: DiffusionSchedule,
    x_t: np.ndarray,
    t: int,
    eps_hat: np.ndarray,
    clip_x0: tuple[float, float],
) -> np.ndarray:
    """Clamp the implied clean state and re-derive the noise estimate.

    Re-deriving eps from the clamped estimate keeps every stepper a function
    of (x_t, x0_hat) only, so the ancestral/skip-step equivalence is exact
    even when the clamp binds.  Without a clamp the raw prediction is used
    and the formulas below reduce to their textbook form.
    """
    abar = sched.alpha_bar_at(t)
    x0_hat = (x_t - math.sqrt(1.0 - abar) * eps_hat) / math.sqrt(abar)
    x0_hat = np.clip(x0_hat, clip_x0[0], clip_x0[1])
    return (x_t - math.sqrt(abar) * x0_hat) / math.sqrt(1.0 - abar)


def ddpm_step(
    sched: DiffusionSchedule,
    x_t: np.ndarray,
    t: int,
    eps_hat: np.ndarray,
    noise: np.ndarray,
    clip_x0: tuple[float, float] | None = None,
) -> np.ndarray:
    """Ancestral reverse step; the stochastic term vanishes at t = 1."""
    alpha = sched.alpha_at(t)
    abar = sched.alpha_bar_at(t)
    if clip_x0 is not None:
        eps_hat = _clip_state_estimate(sched, x_t, t, eps_hat, clip_x0)
    mean = (x_t - (1.0 - alpha) / math.sqrt(1.0 - abar) * eps_hat) / math.sqrt(alpha)
    if t == 1:
        return mean
    return mean + sched.posterior_sigma_at(t) * noise


def combine(known: np.ndarray, unknown: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Mask-blend: known entries from ``known``, the rest from ``unknown``."""
    if known.shape != unknown.shape or known.shape != mask.shape:
        raise ValueError("combine requires matching shapes")
    m = mask.astype(known.dtype)
    return m * known + (1.0 - m) * unknown


def harmonize_back(sched: DiffusionSchedule, x_prev: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    """One-step forward re-noising of x_{t-1} to x_t (single-step alpha)."""
    alpha = sched.alpha_at(t)
    return math.sqrt(alpha) * x_prev + math.sqrt(1.0 - alpha) * eps


def harmonize_jump(
    sched: DiffusionSchedule, x: np.ndarray, from_level: int, to_level: int, eps: np.ndarray
) -> np.ndarray:
    """Composed forward re-noising from one level to a higher one."""
    if not 0 <= from_level < to_level <= sched.T:
        raise IndexError("need 0 <= from_level < to_level <= T")
    ratio = sched.alpha_bar_at(to_level) / sched.alpha_bar_at(from_level)
    return math.sqrt(ratio) * x + math.sqrt(1.0 - ratio) * eps


def impute_ddim_step(
    sched: DiffusionSchedule,
    x_t: np.ndarray,
    t: int,
    prev_t: int,
    eps_hat: np.ndarray,
    eta: float,
    noise: np.ndarray,
    clip_x0: tuple[float, float] | None = None,
) -> np.ndarray:
    """Skip-capable reverse step through the clean-state estimate.

    x_prev = sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev - sigma^2) eps_hat
             + sigma noise,   x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
    """
    sigma = ddim_sigma(sched, t, prev_t, eta)
    abar_t = sched.alpha_bar_at(t)
    abar_prev = sched.alpha_bar_at(prev_t)
    direction_sq = 1.0 - abar_prev - sigma * sigma
    if direction_sq < -1e-12:
        raise ValueError(f"eta={eta} makes the direction term negative at t={t}")
    if clip_x0 is not None:
        eps_hat = _clip_state_estimate(sched, x_t, t, eps_hat, clip_x0)
    x0_hat = (x_t - math.sqrt(1.0 - abar_t) * eps_hat) / math.sqrt(abar_t)
    out = math.sqrt(abar_prev) * x0_hat + math.sqrt(max(direction_sq, 0.0)) * eps_hat
    if sigma > 0.0:
        out = out + sigma * noise
    return out


# -- full imputation ---------------------------------------------------------


def build_plan(sched: DiffusionSchedule, opts: SamplerOptions) -> StepPlan:
    seq = skip_seq(sched.T, opts.tau if opts.tau is not None else sched.T, opts.skip_type)
    if any(b <= a for a, b in zip(seq, seq[1:])):
        # int truncation collapses dense quad subsets onto repeated steps
        raise ValueError(
            f"skip subset is not strictly ascending (tau={opts.tau}, "
            f"skip_type={opts.skip_type!r}); use a smaller tau"
        )
    return harmonization_plan(seq, opts.jump_length, opts.jump_n_sample)


def _denoiser_time(t_math: int, sample_t: int, train_t: int | None) -> int:
    if train_t is None or train_t == sample_t:
        return t_math
    return max(1, round(t_math * train_t / sample_t))


def _run_plan(
    denoiser: Denoiser,
    x0: np.ndarray,
    mask: np.ndarray,
    sched: DiffusionSchedule,
    plan: StepPlan,
    opts: SamplerOptions,
    rng: Rng,
    train_t: int | None,
    on_step=None,
) -> np.ndarray:
    shape = x0.shape
    n = shape[0]
    dense = opts.tau is None
    top = plan.ts[0]
    # Fixed draw order per step keeps the noise stream identical across
    # stepper variants: known-region noise first, then the step noise.
    x = combine(noisy_known(sched, x0, top + 1, rng.normal(shape)), rng.normal(shape), mask)
    if on_step is not None:
        on_step(top, x)
    for a, b in plan.pairs():
        if b < a:  # denoising step from level a+1 down to level b+1
            eps_known = rng.normal(shape)
            step_noise = rng.normal(shape)
            t_math = a + 1
            with no_grad():
                t_in = np.full(n, _denoiser_time(t_math, sched.T, train_t))
                eps_hat = denoiser(x, t_in).data
            if dense:
                unknown = ddpm_step(sched, x, t_math, eps_hat, step_noise, clip_x0=opts.clip_x0)
            else:
                unknown = impute_ddim_step(
                    sched, x, t_math, b + 1, eps_hat, opts.eta, step_noise, clip_x0=opts.clip_x0
                )
            known = noisy_known(sched, x0, b + 1, eps_known)
            x = combine(known, unknown, mask)
        else:  # retrace: re-noise the whole state from level a+1 up to b+1
            x = harmonize_jump(sched, x, a + 1, b + 1, rng.normal(shape))
        if on_step is not None:
            on_step(b, x)
    return x


def impute(
    denoiser: Denoiser,
    table: MaskedTable,
    opts: SamplerOptions,
    sched: DiffusionSchedule | None = None,
    train_t: int | None = None,
    on_step=None,
) -> np.ndarray:
    """Fill the unknown region of a scaled table; known entries pass through.

    Runs ``opts.n_inferences`` independently seeded inferences and returns
    their mean (in inference-index order); every known entry of the result
    equals the observation exactly.
    """
    if sched is None:
        sched = build_cosine_schedule(opts.t_sampling)
    if table.x_obs.shape[1] != denoiser.config.n_features:
        raise ValueError(
            f"table has {table.x_obs.shape[1]} features, denoiser expects "
            f"{denoiser.config.n_features}"
        )
    mask = table.mask
    x0 = np.where(mask, table.x_obs, 0.0)  # placeholders at missing entries are never read
    plan = build_plan(sched, opts)
    acc = np.zeros_like(x0)
    for i in range(opts.n_inferences):
        rng = Rng(derive_seed(opts.seed, i))
        acc += _run_plan(denoiser, x0, mask, sched, plan, opts, rng, train_t,
                         on_step=on_step if i == 0 else None)
    out = acc / opts.n_inferences
    out[mask] = table.x_obs[mask]
    return out
