"""Binary classification: the probit sum-of-trees model with latent augmentation.

The latent utilities z_i ~ N(G(x_i) + c, 1) have sign equal to the label, the
noise scale is fixed at one, and each sweep first refreshes the latents and
then runs the ordinary backfitting sweep on z - c as the working response.
Probabilities are shrunk toward a target rate (0.5 by default) through the
offset c, the normal quantile of that rate.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .data import Dataset
from .errors import BartError, DegenerateLabelsError
from .mcmc import ChainConfig, _sweep_engine
from .posterior import PosteriorDraws, _forest_values, _quantile_pair
from .priors import PriorSpec


def _truncated_above_zero(rng: np.random.Generator, mean: np.ndarray) -> np.ndarray:
    """Vectorized draw of z ~ N(mean, 1) conditioned on z > 0.

    Inverse-CDF sampling carried out through the log survival function, which
    stays accurate when the mean is far below the truncation point.
    """
    mean = np.asarray(mean, dtype=float)
    u = 1.0 - rng.random(mean.shape)  # in (0, 1]
    # standardized bound a = -mean; P(Z > t) = u * P(Z > a) gives t = -ndtri(u * ndtr(mean))
    t = -ndtri_exp(np.log(u) + log_ndtr(mean))
    z = mean + t
    return np.maximum(z, np.finfo(float).tiny)


def draw_latents(
    rng: np.random.Generator, labels: np.ndarray, forest_values: np.ndarray, offset: float
) -> np.ndarray:
    """Refresh the latent utilities given the current forest.

    z_i is normal with unit variance around forest + offset, truncated to
    (0, inf) for label 1 and to (-inf, 0] for label 0, so sign(z_i) always
    matches the label.
    """
    labels = np.asarray(labels)
    mean = np.asarray(forest_values, dtype=float) + offset
    # the label-0 side is the mirror image of the label-1 side
    signed_mean = np.where(labels == 1, mean, -mean)
    z = _truncated_above_zero(rng, signed_mean)
    return np.where(labels == 1, z, -z)


def run_probit_chain(
    data: Dataset,
    spec: PriorSpec,
    config: ChainConfig,
    offset_rate: float = 0.5,
    progress=None,
) -> PosteriorDraws:
    """Backfitting sampler for binary labels via latent-variable augmentation.

    Each sweep draws the latents given the forest, then performs the standard
    sweep on the latent residuals with sigma fixed at one; no response scaling
    is applied.  ``offset_rate`` is the probability toward which predictions
    are shrunk (offset c = its normal quantile; 0.5 gives c = 0).
    """
    if data.mode != "probit":
        raise BartError("run_probit_chain needs a probit-mode dataset")
    if spec.mode != "probit":
        raise BartError("run_probit_chain needs a probit-mode prior")
    labels = data.y
    if not ((labels == 0) | (labels == 1)).all():
        raise DegenerateLabelsError("labels must be 0/1")
    if labels.min() == labels.max():
        raise DegenerateLabelsError("both classes must be present")
    if not 0.0 < offset_rate < 1.0:
        raise BartError(f"offset rate must lie in (0, 1), got {offset_rate}")
    offset = float(ndtri(offset_rate))

    def hook(rng, fit):
        z = draw_latents(rng, labels, fit, offset)
        return z - offset

    ensembles = tuple(
        ens
        for _, ens in _sweep_engine(
            data,
            spec,
            config,
            sigma_init=1.0,
            sigma_fixed=1.0,
            latent_hook=hook,
            progress=progress,
        )
    )
    return PosteriorDraws(
        ensembles=ensembles,
        grids=data.grids,
        scaling=None,
        mode="probit",
        spec=spec,
        config=config,
        columns=data.columns,
        response_name=data.response_name,
        offset=offset,
    )


def predict_prob(draws: PosteriorDraws, x: np.ndarray, alpha: float = 0.10):
    """Posterior mean and interval of P(Y = 1 | x) for each row of ``x``.

    Each draw contributes the normal CDF of its forest value plus the offset;
    the summary is the mean and the alpha/2, 1 - alpha/2 quantiles of those
    per-draw probabilities.
    """
    if draws.mode != "probit":
        raise BartError("predict_prob needs probit-mode draws")
    probs = ndtr(_forest_values(draws, x) + draws.offset)
    mean = probs.mean(axis=0)
    lo, hi = _quantile_pair(probs, alpha)
    return mean, lo, hi
