"""Automatic image-scale tuning.

The image-side scale is tuned by minimising the Euclidean distance between
the composed image vector (as a function of its scale) and a fixed composed
text vector, using a one-dimensional Nelder-Mead simplex. The objective is
quadratic in the scale, so a closed-form projection exists; the simplex
search is kept as the shipped method because it also covers non-quadratic
losses, and the closed form serves as an independent test oracle.

The loss operates on the raw (un-normalised) composed vectors; normalising
inside the loss would change the minimiser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import QueryBundle, QueryCache, compose_image, compose_text
from .errors import InvalidParameter, NonFiniteObjective

DEFAULT_X0 = 1.0
DEFAULT_STEP = 0.5
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200

# standard simplex coefficients
_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5


class ScalarMinResult(NamedTuple):
    x: float
    fx: float
    iterations: int
    converged: bool


def nelder_mead_scalar(
    f: Callable[[float], float],
    x0: float,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ScalarMinResult:
    """Minimise a scalar function with a two-point Nelder-Mead simplex.

    The simplex starts at {x0, x0 + step} and the loop stops once both the
    simplex width and the function spread drop below ``tol`` (requiring both
    keeps the located point accurate even on shallow objectives), or after
    ``max_iter`` iterations (max_iter=0 returns x0 unoptimised).
    The best vertex is monotone, so the result never regresses below the
    better of the two starting points.
    """
    if step <= 0:
        raise InvalidParameter(f"step must be > 0, got {step}")
    if tol <= 0:
        raise InvalidParameter(f"tol must be > 0, got {tol}")

    def probe(x: float) -> float:
        fx = float(f(x))
        if not math.isfinite(fx):
            raise NonFiniteObjective(f"objective returned {fx} at x={x}")
        return fx

    if max_iter <= 0:
        return ScalarMinResult(x=x0, fx=probe(x0), iterations=0, converged=False)

    xs = [float(x0), float(x0) + float(step)]
    fs = [probe(xs[0]), probe(xs[1])]

    iterations = 0
    converged = False
    for _ in range(max_iter):
        if fs[1] < fs[0]:
            xs.reverse()
            fs.reverse()
        best, worst = xs[0], xs[1]
        fbest, fworst = fs[0], fs[1]
        if abs(worst - best) < tol and abs(fworst - fbest) < tol:
            converged = True
            break
        iterations += 1

        xr = best + _REFLECT * (best - worst)
        fr = probe(xr)
        if fr < fbest:
            xe = best + _EXPAND * (best - worst)
            fe = probe(xe)
            if fe < fr:
                xs[1], fs[1] = xe, fe
            else:
                xs[1], fs[1] = xr, fr
        elif fr < fworst:
            # outside contraction, else shrink toward the best vertex
            xc = best + _CONTRACT * (best - worst)
            fc = probe(xc)
            if fc <= fr:
                xs[1], fs[1] = xc, fc
            else:
                xsh = best + _SHRINK * (worst - best)
                xs[1], fs[1] = xsh, probe(xsh)
        else:
            # with one moving vertex the inside-contraction point and the
            # shrink point coincide, so the step is accepted either way
            xc = best + _CONTRACT * (worst - best)
            xs[1], fs[1] = xc, probe(xc)

    if fs[1] < fs[0]:
        xs.reverse()
        fs.reverse()
    return ScalarMinResult(x=xs[0], fx=fs[0], iterations=iterations, converged=converged)


@dataclass(frozen=True)
class TuneResult:
    """Outcome of one image-scale optimisation."""

    alpha_i: float
    loss: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "alpha_i": self.alpha_i,
            "loss": self.loss,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def tune_alpha_i(
    bundle: QueryBundle,
    alpha_t: float = 1.0,
    *,
    x0: float = DEFAULT_X0,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TuneResult:
    """Find the image scale whose composed image vector is closest (L2) to
    the composed text vector at the given text scale.

    With a zero residual any scale is optimal; 1.0 is returned, converged.
    The default simplex {1.0, 1.5} contains 1.0, so the result never loses
    to the untuned default.
    """
    cache = QueryCache.from_bundle(bundle)
    ref_text = cache.ref_text.astype(np.float64)
    ref_image = cache.ref_image.astype(np.float64)
    pdv = cache.pdv.astype(np.float64)

    phi_t = compose_text(ref_text, pdv, alpha_t)

    def loss(alpha: float) -> float:
        return float(np.linalg.norm(phi_t - compose_image(ref_image, pdv, alpha)))

    if float(np.linalg.norm(pdv)) <= 1e-12:
        return TuneResult(alpha_i=1.0, loss=loss(1.0), iterations=0, converged=True)

    res = nelder_mead_scalar(loss, x0=x0, step=step, tol=tol, max_iter=max_iter)
    return TuneResult(
        alpha_i=res.x, loss=res.fx, iterations=res.iterations, converged=res.converged
    )


def tune_many(bundles, alpha_t: float = 1.0) -> list[TuneResult]:
    """Tune each bundle independently (per-query mode); callers may average
    the scales for a per-dataset setting."""
    return [tune_alpha_i(b, alpha_t) for b in bundles]
