#!/usr/bin/env python3
"""Regenerate data/corpus and data/library from the sample images shipped
with scikit-image and scikit-learn. Licenses are listed in data/README.md.

Corpus images keep their native resolution; library images are fitted to
640 px.
"""
import os
import sys

import numpy as np
from PIL import Image
import skimage.data as sk
import sklearn.datasets

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def fit(img, max_side=640):
    pil = Image.fromarray(img)
    w, h = pil.size
    scale = max_side / max(w, h)
    if scale < 1.0:
        pil = pil.resize((round(w * scale), round(h * scale)), Image.LANCZOS)
    return pil


def save(pil, sub, name):
    os.makedirs(os.path.join(ROOT, sub), exist_ok=True)
    pil.save(os.path.join(ROOT, sub, name + ".png"), optimize=True)


def main():
    flower = sklearn.datasets.load_sample_image("flower.jpg")
    corpus = {
        "chelsea": sk.chelsea(),
        "flower": flower,
        "hubble": sk.hubble_deep_field(),
        "moon": sk.moon(),
        "rocket": sk.rocket(),
    }
    for name, img in corpus.items():
        save(Image.fromarray(img), "corpus", name)

    extra = {
        "astronaut": sk.astronaut(),
        "camera": sk.camera(),
        "chelsea": sk.chelsea(),
        "coffee": sk.coffee(),
        "rocket": sk.rocket(),
        "brick": sk.brick(),
        "grass": sk.grass(),
        "gravel": sk.gravel(),
        "cell": sk.cell(),
        "clock": sk.clock(),
        "coins": sk.coins(),
        "text": sk.text(),
        "ihc": sk.immunohistochemistry(),
        "retina": sk.retina(),
        "retina_zoom": sk.retina()[353:1058, 353:1058],
        "phantom": (np.clip(sk.shepp_logan_phantom(), 0, 1) * 255).astype(np.uint8),
    }
    hubble = sk.hubble_deep_field()
    h, w = hubble.shape[:2]
    for i, (ys, xs) in enumerate([(0, 0), (0, w // 2), (h // 2, 0), (h // 2, w // 2)]):
        extra[f"hubble_q{i}"] = hubble[ys:ys + h // 2, xs:xs + w // 2]
    for name, img in extra.items():
        save(fit(img), "library", name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
