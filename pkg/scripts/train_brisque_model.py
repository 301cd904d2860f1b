#!/usr/bin/env python3
"""Train the bundled quality-scoring model.

Builds a corpus of synthetic textures (smoothed seeded noise at several
correlation lengths), degrades them with additive Gaussian noise and
Gaussian blur of graded severity, labels each variant with a severity
score, extracts the 36 scene-statistics features, and fits an RBF SVR in
the [-1, 1]-scaled feature space.  The fitted machine is exported to
src/msqa/data/brisque_model.json in the explicit form the package loads.

Held-out check before writing: on textures from unseen seeds, the
exported model must score additive noise non-decreasingly in sigma, and
the exported kernel sum must match sklearn's predict() to 1e-9.

Usage: python3 scripts/train_brisque_model.py [--out PATH]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.svm import SVR

from msqa.iqa import BrisqueModel, brisque_features, brisque_score, model_from_dict
from msqa.image_core import ImageBuffer, Plane, to_luminance

RBF_GAMMA = 0.05
SVR_C = 100.0
SVR_EPSILON = 2.0

TRAIN_SEEDS = range(1000, 1024)
HOLDOUT_SEEDS = (9000, 9001, 9002, 9003)

NOISE_SIGMAS = (2.0, 5.0, 10.0, 15.0, 22.0, 30.0, 40.0)
BLUR_SIGMAS = (0.5, 1.0, 2.0, 3.0, 5.0)
COMBO = ((1.0, 5.0), (1.0, 15.0), (2.0, 5.0), (2.0, 15.0))

CHECK_NOISE = (0.0, 5.0, 15.0, 30.0)


def make_texture(seed: int, size: int = 160, smooth: float = 2.0,
                 amp: float = 60.0) -> np.ndarray:
    """Smoothed Gaussian noise field in [0, 255], float64."""
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), smooth)
    field = 128.0 + amp * field / field.std()
    return np.clip(field, 0.0, 255.0)


def degrade(texture: np.ndarray, blur: float, noise: float, seed: int) -> np.ndarray:
    out = texture
    if blur > 0:
        out = ndimage.gaussian_filter(out, blur)
    if noise > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, noise, out.shape)
    return np.clip(out, 0.0, 255.0)


def as_plane(gray: np.ndarray) -> Plane:
    """Quantise to uint8, stack to RGB, and take luminance -- the same
    path a decoded image file goes through."""
    u8 = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    rgb = np.stack([u8, u8, u8], axis=-1)
    return to_luminance(ImageBuffer(rgb))


def severity_label(blur: float, noise: float) -> float:
    if blur == 0 and noise == 0:
        return 5.0
    label = 10.0 if (blur > 0 and noise > 0) else 0.0
    if blur > 0:
        label += 10.0 + 12.0 * blur
    if noise > 0:
        label += 12.0 + 1.6 * noise
    return label


def build_corpus() -> tuple[np.ndarray, np.ndarray]:
    features = []
    labels = []
    smooths = (1.0, 2.0, 4.0, 8.0)
    amps = (40.0, 60.0, 75.0)
    for i, seed in enumerate(TRAIN_SEEDS):
        texture = make_texture(seed, smooth=smooths[i % len(smooths)],
                               amp=amps[i % len(amps)])
        variants: list[tuple[float, float]] = [(0.0, 0.0)]
        variants += [(0.0, s) for s in NOISE_SIGMAS]
        variants += [(s, 0.0) for s in BLUR_SIGMAS]
        variants += list(COMBO)
        for j, (blur, noise) in enumerate(variants):
            gray = degrade(texture, blur, noise, seed=seed * 100 + j)
            feats = brisque_features(as_plane(gray))
            if feats.degenerate:
                continue
            features.append(feats.values)
            labels.append(severity_label(blur, noise))
    return np.array(features), np.array(labels)


def scale(features: np.ndarray, fmin: np.ndarray, fmax: np.ndarray) -> np.ndarray:
    span = fmax - fmin
    scaled = np.zeros_like(features)
    ok = span > 0
    scaled[:, ok] = -1.0 + 2.0 * (features[:, ok] - fmin[ok]) / span[ok]
    return scaled


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent
                    / "src" / "msqa" / "data" / "brisque_model.json"),
    )
    args = parser.parse_args()

    print("building corpus ...")
    features, labels = build_corpus()
    print(f"  {features.shape[0]} samples, {features.shape[1]} features")

    fmin = features.min(axis=0)
    fmax = features.max(axis=0)
    scaled = scale(features, fmin, fmax)

    svr = SVR(kernel="rbf", gamma=RBF_GAMMA, C=SVR_C, epsilon=SVR_EPSILON)
    svr.fit(scaled, labels)
    print(f"  {svr.support_vectors_.shape[0]} support vectors")

    model = BrisqueModel(
        rbf_gamma=RBF_GAMMA,
        intercept=float(svr.intercept_[0]),
        feature_min=fmin,
        feature_max=fmax,
        support_vectors=svr.support_vectors_,
        dual_coefs=svr.dual_coef_[0],
    )
    # round-trip through the serialised form before any checks
    model = model_from_dict(json.loads(json.dumps(model.to_dict())))

    print("verifying exported kernel sum against sklearn ...")
    train_pred = svr.predict(scaled)
    for k in range(0, features.shape[0], 17):
        ours = brisque_score(
            _features_obj(features[k]), model)
        if abs(ours - train_pred[k]) > 1e-9:
            print(f"  FAIL: sample {k}: {ours} vs {train_pred[k]}")
            return 1
    print("  ok")

    print("verifying noise monotonicity on held-out textures ...")
    worst = 0.0
    for seed in HOLDOUT_SEEDS:
        texture = make_texture(seed, size=200, smooth=2.5, amp=55.0)
        scores = []
        for n, sigma in enumerate(CHECK_NOISE):
            gray = degrade(texture, 0.0, sigma, seed=seed * 10 + n)
            feats = brisque_features(as_plane(gray))
            scores.append(brisque_score(feats, model))
        diffs = np.diff(scores)
        worst = min(worst, float(diffs.min()))
        marker = "ok" if np.all(diffs >= 0) else "VIOLATION"
        print(f"  seed {seed}: {[f'{s:.2f}' for s in scores]} {marker}")
    if worst < 0:
        print("noise monotonicity violated on a held-out texture; not writing")
        return 1

    out = Path(args.out)
    out.write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")
    print(f"wrote {out} ({out.stat().st_size} bytes)")
    return 0


def _features_obj(values: np.ndarray):
    from msqa.iqa import BrisqueFeatures

    return BrisqueFeatures(values)


if __name__ == "__main__":
    sys.exit(main())
