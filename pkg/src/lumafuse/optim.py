"""Projected gradient descent for prompt fitting, ISP parameter fitting, and
cue refinement.

All optimizers are plain fixed-step PGD (no momentum), deterministic given
their inputs and config, and return the best iterate seen together with an
(iteration, loss) trace. Prompt vectors are re-projected onto the unit
sphere after every step; filter parameters are clipped into their ranges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .filters import IspParams, PARAM_RANGES, apply_pipeline, pipeline_jacobian
from .image import Image
from .prompts import (
    Embedding,
    Margins,
    PromptPair,
    cw_loss_and_grad,
    li_mean_loss_and_grads,
)

Trace = list[tuple[int, float]]


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.05
    max_iters: int = 500
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")


@dataclass(frozen=True)
class PromptPairFit:
    pair: PromptPair
    loss: float
    initial_loss: float
    iterations: int
    trace: Trace


@dataclass(frozen=True)
class ParamsFit:
    params: IspParams
    mse: float
    initial_mse: float
    iterations: int
    trace: Trace


@dataclass(frozen=True)
class PromptRefinement:
    t_tt: Embedding
    loss: float
    initial_loss: float
    iterations: int
    trace: Trace


def trace_to_csv(trace: Trace) -> str:
    return "iter,loss\n" + "".join(f"{i},{loss!r}\n" for i, loss in trace)


def _renorm(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def optimize_prompt_pair(
    low_embs: Sequence[Embedding],
    normal_embs: Sequence[Embedding],
    init: PromptPair,
    cfg: OptimizerConfig | None = None,
) -> PromptPairFit:
    """Fit the prompt pair by minimizing the mean binary language-image loss
    (label 1 for normal-light embeddings, 0 for low-light ones)."""
    cfg = cfg or OptimizerConfig()
    if not low_embs or not normal_embs:
        raise ValueError("need at least one low and one normal embedding")
    dim = init.t_pos.dim
    for e in list(low_embs) + list(normal_embs):
        if e.dim != dim:
            raise ShapeError(f"embedding dim {e.dim} != prompt dim {dim}")
    lows = np.stack([e.values for e in low_embs])
    normals = np.stack([e.values for e in normal_embs])

    t_pos = init.t_pos.values.copy()
    t_neg = init.t_neg.values.copy()
    loss, g_pos, g_neg = li_mean_loss_and_grads(t_pos, t_neg, normals, lows)
    best = (loss, t_pos.copy(), t_neg.copy())
    trace: Trace = [(0, loss)]
    prev = loss
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        t_pos = _renorm(t_pos - cfg.learning_rate * g_pos)
        t_neg = _renorm(t_neg - cfg.learning_rate * g_neg)
        loss, g_pos, g_neg = li_mean_loss_and_grads(t_pos, t_neg, normals, lows)
        trace.append((it, loss))
        iterations = it
        if loss < best[0]:
            best = (loss, t_pos.copy(), t_neg.copy())
        if prev - loss < cfg.tolerance:
            break
        prev = loss
    pair = PromptPair(Embedding.unit(best[1]), Embedding.unit(best[2]))
    return PromptPairFit(pair, best[0], trace[0][1], iterations, trace)


def _project_params(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    for i, (lo, hi) in enumerate(PARAM_RANGES):
        out[i] = min(max(out[i], lo), hi)
    return out


def fit_isp_params(
    img: Image,
    ref: Image,
    cfg: OptimizerConfig | None = None,
) -> ParamsFit:
    """Fit filter parameters by gradient descent on pixel MSE to a reference.

    This is a surrogate objective: it exercises the pipeline Jacobian,
    projection, and convergence machinery without a differentiable frozen
    encoder in the loop. Starts at the identity parameters.
    """
    cfg = cfg or OptimizerConfig()
    if img.data.shape != ref.data.shape:
        raise ShapeError(f"image shapes differ: {img.data.shape} vs {ref.data.shape}")
    n = img.data.size

    def objective(values: np.ndarray) -> tuple[float, np.ndarray]:
        p = IspParams.from_array(values)
        out = apply_pipeline(img, p)
        jac = pipeline_jacobian(img, p)
        diff = out.data - ref.data
        mse = float(np.mean(diff * diff))
        grad = np.array([2.0 * float(np.sum(diff * d)) / n for d in jac.stacked()])
        return mse, grad

    values = IspParams.identity().as_array()
    mse, grad = objective(values)
    best = (mse, values.copy())
    trace: Trace = [(0, mse)]
    prev = mse
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        values = _project_params(values - cfg.learning_rate * grad)
        mse, grad = objective(values)
        trace.append((it, mse))
        iterations = it
        if mse < best[0]:
            best = (mse, values.copy())
        if prev - mse < cfg.tolerance:
            break
        prev = mse
    return ParamsFit(IspParams.from_array(best[1]), best[0], trace[0][1], iterations, trace)


ITERATE_FACTORS = (0.2, 0.4, 0.6, 0.8)


@dataclass(frozen=True)
class IterateSeries:
    """Snapshots of increasing enhancement strength from one input image.

    ``params`` and ``images`` run weakest to strongest (factors strictly
    increasing); ``final_image`` is the full-strength enhancement.
    """

    factors: tuple[float, ...]
    params: tuple[IspParams, ...]
    images: tuple[Image, ...]
    final_params: IspParams
    final_image: Image

    def __post_init__(self):
        if list(self.factors) != sorted(set(self.factors)):
            raise ValueError(f"factors must be strictly increasing, got {self.factors}")

    def all_images_weak_to_strong(self) -> tuple[Image, ...]:
        return self.images + (self.final_image,)


def generate_iterates(img: Image, p_final: IspParams) -> IterateSeries:
    """Interpolate parameters between identity and p_final at factors
    0.2/0.4/0.6/0.8 and render each snapshot."""
    identity = IspParams.identity().as_array()
    target = p_final.as_array()
    params = []
    images = []
    for t in ITERATE_FACTORS:
        p = IspParams.from_array(identity + t * (target - identity))
        params.append(p)
        images.append(apply_pipeline(img, p))
    return IterateSeries(
        factors=ITERATE_FACTORS,
        params=tuple(params),
        images=tuple(images),
        final_params=p_final,
        final_image=apply_pipeline(img, p_final),
    )


def refine_prompt(
    t_tt: Embedding,
    t_neg: Embedding,
    e_t: Embedding,
    e_f: Embedding,
    series_embs: Sequence[Embedding],
    m: Margins = Margins(),
    cfg: OptimizerConfig | None = None,
    mode: str = "literal",
) -> PromptRefinement:
    """Refine the positive cue by PGD on the margin-ranking loss.

    ``series_embs`` holds the five enhancement embeddings ordered weakest to
    strongest (the full-strength one last). Only t_tt moves; all image
    embeddings and the negative cue stay fixed.
    """
    cfg = cfg or OptimizerConfig()
    dims = {t_tt.dim, t_neg.dim, e_t.dim, e_f.dim} | {e.dim for e in series_embs}
    if len(dims) != 1:
        raise ShapeError(f"embedding dims differ: {sorted(dims)}")
    if len(series_embs) != 5:
        raise ValueError(f"need 5 series embeddings, got {len(series_embs)}")
    strongest_first = np.stack([e.values for e in reversed(series_embs)])
    tn = t_neg.values
    et = e_t.values
    ef = e_f.values

    t = t_tt.values.copy()
    loss, grad = cw_loss_and_grad(t, tn, et, ef, strongest_first, m, mode)
    best = (loss, t.copy())
    trace: Trace = [(0, loss)]
    prev = loss
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        if best[0] == 0.0:
            break
        t = _renorm(t - cfg.learning_rate * grad)
        loss, grad = cw_loss_and_grad(t, tn, et, ef, strongest_first, m, mode)
        trace.append((it, loss))
        iterations = it
        if loss < best[0]:
            best = (loss, t.copy())
        if prev - loss < cfg.tolerance:
            break
        prev = loss
    if np.array_equal(best[1], t_tt.values):
        refined = t_tt  # bit-identical when no step improved on the input
    else:
        refined = Embedding.unit(best[1])
    return PromptRefinement(refined, best[0], trace[0][1], iterations, trace)
