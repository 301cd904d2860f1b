"""No-reference image quality metrics.

Four per-image measures: variance-of-Laplacian sharpness, Michelson
contrast, the Hasler--Suesstrunk colourfulness index, and a BRISQUE-style
natural-scene-statistics score (Mittal et al., "No-Reference Image Quality
Assessment in the Spatial Domain", IEEE TIP 2012).

The BRISQUE pipeline: normalise luminance into MSCN coefficients, fit a
generalized Gaussian to them and an asymmetric generalized Gaussian to the
four neighbouring-pixel product maps, repeat at half resolution, and feed
the 36 fit parameters to an RBF support-vector regressor.  Higher scores
mean stronger distortion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateInputError, DimensionError, ModelError
from .image_core import (
    BorderPolicy,
    ImageBuffer,
    Kernel,
    Plane,
    convolve2d,
    downsample2x,
    gaussian_kernel,
    to_luminance,
)

_LAPLACIAN = Kernel(np.array([[0.0, 1.0, 0.0],
                              [1.0, -4.0, 1.0],
                              [0.0, 1.0, 0.0]]))

# Smallest sample count the moment-matching fits will accept.
_MIN_FIT_SAMPLES = 16

# Shape-parameter search grid: 0.2 to 10.0 in steps of 0.001.
_GAMMA_GRID = np.linspace(0.2, 10.0, 9801)


def _gamma_ratio(a: np.ndarray | float, b: np.ndarray | float) -> np.ndarray | float:
    """Gamma(a) / Gamma(b) computed in log space."""
    return np.exp(gammaln(a) - gammaln(b))


# rho(gamma) = Gamma(2/gamma)^2 / (Gamma(1/gamma) * Gamma(3/gamma)); strictly
# increasing on the grid, which makes nearest-match lookup a binary search.
_RHO_TABLE = np.exp(
    2.0 * gammaln(2.0 / _GAMMA_GRID)
    - gammaln(1.0 / _GAMMA_GRID)
    - gammaln(3.0 / _GAMMA_GRID)
)


def _alpha_from_ratio(rho_hat: float) -> float:
    """Grid value whose rho() is nearest to ``rho_hat``."""
    idx = int(np.searchsorted(_RHO_TABLE, rho_hat))
    if idx <= 0:
        return float(_GAMMA_GRID[0])
    if idx >= _RHO_TABLE.size:
        return float(_GAMMA_GRID[-1])
    if rho_hat - _RHO_TABLE[idx - 1] <= _RHO_TABLE[idx] - rho_hat:
        return float(_GAMMA_GRID[idx - 1])
    return float(_GAMMA_GRID[idx])


@dataclass(frozen=True)
class GgdFit:
    """Zero-mean generalized Gaussian fit: shape alpha, variance sigma_sq."""

    alpha: float
    sigma_sq: float
    degenerate: bool = False


@dataclass(frozen=True)
class AggdFit:
    """Asymmetric generalized Gaussian fit.

    ``sigma_l_sq`` / ``sigma_r_sq`` are the left / right scale parameters
    squared, ``eta`` the mean term derived from their difference.
    """

    alpha: float
    eta: float
    sigma_l_sq: float
    sigma_r_sq: float
    degenerate: bool = False


@dataclass(frozen=True)
class BrisqueFeatures:
    """36-vector of scene-statistics features over two scales."""

    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (36,):
            raise DimensionError(f"expected 36 features, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise DimensionError("features contain non-finite values")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class IqaRecord:
    """All four metrics for one image.  ``brisque`` is None when the
    feature extraction was degenerate (e.g. a constant image)."""

    sharpness: float
    contrast: float
    colorfulness: float
    brisque: float | None


# ---------------------------------------------------------------------------
# classic metrics


def sharpness(plane: Plane) -> float:
    """Population variance of the Laplacian response, border ring excluded.

    The 3x3 Laplacian [[0,1,0],[1,-4,1],[0,1,0]] is applied with replicate
    borders; the outermost ring of the response, which depends on the
    border policy, is dropped before taking the variance.
    """
    if plane.height < 3 or plane.width < 3:
        raise DimensionError("sharpness needs a plane of at least 3x3")
    resp = convolve2d(plane, _LAPLACIAN, BorderPolicy.REPLICATE)
    interior = resp.samples[1:-1, 1:-1]
    return float(interior.var())


def contrast(plane: Plane) -> float:
    """Michelson contrast (max - min) / (max + min) over a non-negative plane.

    Defined as 0 for an all-zero plane.
    """
    arr = plane.samples
    if np.any(arr < 0):
        raise DimensionError("contrast expects non-negative samples")
    lmax = float(arr.max())
    lmin = float(arr.min())
    if lmax + lmin == 0.0:
        return 0.0
    return (lmax - lmin) / (lmax + lmin)


def colorfulness(image: ImageBuffer) -> float:
    """Hasler--Suesstrunk colourfulness from signed opponent channels.

    rg = R - G and yb = (R + G)/2 - B are kept signed; the index is
    sqrt(var(rg) + var(yb)) + 0.3 * sqrt(mean(rg)^2 + mean(yb)^2) with
    population variances.
    """
    px = image.pixels.astype(np.float64)
    r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    rg = r - g
    yb = 0.5 * (r + g) - b
    std_root = np.sqrt(rg.var() + yb.var())
    mean_root = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float(std_root + 0.3 * mean_root)


# ---------------------------------------------------------------------------
# BRISQUE pipeline


def mscn(plane: Plane) -> Plane:
    """Mean-subtracted contrast-normalised coefficients.

    (I - mu) / (sigma + 1) with mu and sigma the locally Gaussian-weighted
    mean and standard deviation (7x7 window, sigma = 7/6, replicate
    borders).  The +1 keeps flat regions stable for data in [0, 255].
    """
    if plane.height < 7 or plane.width < 7:
        raise DimensionError("mscn needs a plane of at least 7x7")
    window = gaussian_kernel(7, 7.0 / 6.0)
    mu = convolve2d(plane, window, BorderPolicy.REPLICATE).samples
    sq_mean = convolve2d(Plane(plane.samples**2), window, BorderPolicy.REPLICATE).samples
    sigma = np.sqrt(np.maximum(sq_mean - mu**2, 0.0))
    return Plane((plane.samples - mu) / (sigma + 1.0))


def pairwise_products(coeffs: Plane) -> tuple[Plane, Plane, Plane, Plane]:
    """Products of each MSCN coefficient with its H, V, D1, D2 neighbour.

    Returns four planes, each one row and/or column smaller than the input:
    horizontal, vertical, main-diagonal, and anti-diagonal shifts.
    """
    m = coeffs.samples
    if coeffs.height < 2 or coeffs.width < 2:
        raise DimensionError("pairwise products need a plane of at least 2x2")
    horiz = m[:, :-1] * m[:, 1:]
    vert = m[:-1, :] * m[1:, :]
    diag1 = m[:-1, :-1] * m[1:, 1:]
    diag2 = m[:-1, 1:] * m[1:, :-1]
    return Plane(horiz), Plane(vert), Plane(diag1), Plane(diag2)


def fit_ggd(samples: np.ndarray) -> GgdFit:
    """Moment-matching generalized Gaussian fit.

    Matches the ratio E[|x|]^2 / E[x^2] against its closed form on the
    shape grid.  All-zero input cannot constrain the shape; it is reported
    with the grid maximum, zero variance, and the degenerate flag set.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < _MIN_FIT_SAMPLES:
        raise DegenerateInputError(
            f"need at least {_MIN_FIT_SAMPLES} samples, got {x.size}"
        )
    sigma_sq = float(np.mean(x**2))
    if sigma_sq == 0.0:
        return GgdFit(alpha=float(_GAMMA_GRID[-1]), sigma_sq=0.0, degenerate=True)
    rho_hat = float(np.mean(np.abs(x))) ** 2 / sigma_sq
    return GgdFit(alpha=_alpha_from_ratio(rho_hat), sigma_sq=sigma_sq)


def fit_aggd(samples: np.ndarray) -> AggdFit:
    """Moment-matching asymmetric generalized Gaussian fit.

    Left scale from the strictly negative samples, right scale from the
    non-negative ones.  When either side is empty, or the right side
    carries no energy, the asymmetric model is unconstrained; the fit
    falls back to the symmetric one (eta = 0, equal scales) and sets the
    degenerate flag.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < _MIN_FIT_SAMPLES:
        raise DegenerateInputError(
            f"need at least {_MIN_FIT_SAMPLES} samples, got {x.size}"
        )
    left = x[x < 0]
    right = x[x >= 0]
    if left.size == 0 or right.size == 0:
        return _aggd_symmetric_fallback(x)
    sigma_l = float(np.sqrt(np.mean(left**2)))
    sigma_r = float(np.sqrt(np.mean(right**2)))
    if sigma_r == 0.0 or sigma_l == 0.0:
        return _aggd_symmetric_fallback(x)
    gamma_hat = sigma_l / sigma_r
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x**2))
    big_r = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    alpha = _alpha_from_ratio(big_r)
    eta = (sigma_r - sigma_l) * float(_gamma_ratio(2.0 / alpha, 1.0 / alpha))
    return AggdFit(
        alpha=alpha,
        eta=eta,
        sigma_l_sq=sigma_l**2,
        sigma_r_sq=sigma_r**2,
    )


def _aggd_symmetric_fallback(x: np.ndarray) -> AggdFit:
    g = fit_ggd(x)
    return AggdFit(
        alpha=g.alpha,
        eta=0.0,
        sigma_l_sq=g.sigma_sq,
        sigma_r_sq=g.sigma_sq,
        degenerate=True,
    )


def brisque_features(plane: Plane) -> BrisqueFeatures:
    """36 scene-statistics features over two scales.

    Per scale: [alpha, sigma_sq] of the MSCN GGD fit, then for each of the
    H, V, D1, D2 product maps [eta, alpha, sigma_l_sq, sigma_r_sq] of the
    AGGD fit.  The second scale is the 2x block-mean downsample.  The
    degenerate flag is the OR over all constituent fits.
    """
    if plane.height < 14 or plane.width < 14:
        raise DimensionError("brisque features need a plane of at least 14x14")
    feats: list[float] = []
    degenerate = False
    scaled = plane
    for scale in range(2):
        if scale > 0:
            scaled = downsample2x(scaled)
        coeffs = mscn(scaled)
        g = fit_ggd(coeffs.samples)
        degenerate = degenerate or g.degenerate
        feats.extend([g.alpha, g.sigma_sq])
        for prod in pairwise_products(coeffs):
            a = fit_aggd(prod.samples)
            degenerate = degenerate or a.degenerate
            feats.extend([a.eta, a.alpha, a.sigma_l_sq, a.sigma_r_sq])
    return BrisqueFeatures(np.array(feats, dtype=np.float64), degenerate=degenerate)


# ---------------------------------------------------------------------------
# SVR scoring


@dataclass(frozen=True)
class BrisqueModel:
    """RBF support-vector regressor in explicit form.

    ``feature_min`` / ``feature_max`` scale raw features to [-1, 1];
    ``support_vectors`` (n x d) live in that scaled space; the score is
    sum_i dual_coefs[i] * exp(-rbf_gamma * ||x - sv_i||^2) + intercept.
    """

    rbf_gamma: float
    intercept: float
    feature_min: np.ndarray
    feature_max: np.ndarray
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    version: str = "1"

    def __post_init__(self) -> None:
        fmin = np.asarray(self.feature_min, dtype=np.float64)
        fmax = np.asarray(self.feature_max, dtype=np.float64)
        svs = np.asarray(self.support_vectors, dtype=np.float64)
        duals = np.asarray(self.dual_coefs, dtype=np.float64)
        if fmin.ndim != 1 or fmax.shape != fmin.shape:
            raise ModelError("feature_min and feature_max must be 1-D and equal length")
        dim = fmin.size
        if svs.ndim != 2 or svs.shape[1] != dim:
            raise ModelError(
                f"support vectors must be (n, {dim}), got shape {svs.shape}"
            )
        if duals.ndim != 1 or duals.size != svs.shape[0]:
            raise ModelError(
                f"need one dual coefficient per support vector "
                f"({svs.shape[0]}), got {duals.size}"
            )
        if not (self.rbf_gamma > 0) or not np.isfinite(self.rbf_gamma):
            raise ModelError(f"rbf_gamma must be positive, got {self.rbf_gamma}")
        if not np.isfinite(self.intercept):
            raise ModelError(f"intercept must be finite, got {self.intercept}")
        for name, arr in (("feature_min", fmin), ("feature_max", fmax),
                          ("support_vectors", svs), ("dual_coefs", duals)):
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} contains non-finite values")
        if np.any(fmin > fmax):
            raise ModelError("feature_min exceeds feature_max")
        object.__setattr__(self, "feature_min", fmin)
        object.__setattr__(self, "feature_max", fmax)
        object.__setattr__(self, "support_vectors", svs)
        object.__setattr__(self, "dual_coefs", duals)

    @property
    def n_features(self) -> int:
        return int(self.feature_min.size)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "rbf_gamma": self.rbf_gamma,
            "intercept": self.intercept,
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
        }


def model_from_dict(doc: dict) -> BrisqueModel:
    """Build a model from a parsed key-value document; :class:`ModelError`
    on anything missing or inconsistent."""
    if not isinstance(doc, dict):
        raise ModelError(f"model document must be a mapping, got {type(doc).__name__}")
    required = ("rbf_gamma", "intercept", "feature_min", "feature_max",
                "support_vectors", "dual_coefs")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ModelError(f"model document missing keys: {', '.join(missing)}")
    try:
        return BrisqueModel(
            rbf_gamma=float(doc["rbf_gamma"]),
            intercept=float(doc["intercept"]),
            feature_min=np.asarray(doc["feature_min"], dtype=np.float64),
            feature_max=np.asarray(doc["feature_max"], dtype=np.float64),
            support_vectors=np.asarray(doc["support_vectors"], dtype=np.float64),
            dual_coefs=np.asarray(doc["dual_coefs"], dtype=np.float64),
            version=str(doc.get("version", "1")),
        )
    except (TypeError, ValueError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc


def load_brisque_model(path: str | Path) -> BrisqueModel:
    """Load a scoring model from a JSON file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read model file {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {p} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def default_model_path() -> Path:
    """Path of the scoring model shipped with the package."""
    return Path(resources.files("msqa.data") / "brisque_model.json")


def load_default_model() -> BrisqueModel:
    return load_brisque_model(default_model_path())


def scale_features(features: BrisqueFeatures, model: BrisqueModel) -> np.ndarray:
    """Map raw features into the model's [-1, 1] training range.

    Dimensions where the training range collapsed (min == max) map to 0.
    Values outside the range extrapolate linearly rather than clamp.
    """
    if features.values.size != model.n_features:
        raise ModelError(
            f"model expects {model.n_features} features, got {features.values.size}"
        )
    span = model.feature_max - model.feature_min
    scaled = np.zeros_like(features.values)
    ok = span > 0
    scaled[ok] = -1.0 + 2.0 * (features.values[ok] - model.feature_min[ok]) / span[ok]
    return scaled


def brisque_score(features: BrisqueFeatures, model: BrisqueModel) -> float:
    """Evaluate the RBF-SVR on one feature vector."""
    x = scale_features(features, model)
    if model.support_vectors.shape[0] == 0:
        return float(model.intercept)
    diffs = model.support_vectors - x[np.newaxis, :]
    kern = np.exp(-model.rbf_gamma * np.sum(diffs**2, axis=1))
    return float(model.dual_coefs @ kern + model.intercept)


def iqa_all(image: ImageBuffer, model: BrisqueModel) -> IqaRecord:
    """All four metrics for one decoded image.

    The colour metric reads RGB directly; the others work on Rec. 601
    luminance.  A degenerate feature vector yields ``brisque=None`` rather
    than a misleading score.
    """
    lum = to_luminance(image)
    feats = brisque_features(lum)
    score = None if feats.degenerate else brisque_score(feats, model)
    return IqaRecord(
        sharpness=sharpness(lum),
        contrast=contrast(lum),
        colorfulness=colorfulness(image),
        brisque=score,
    )
