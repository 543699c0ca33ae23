#!/usr/bin/env python3
"""Regenerate the grayscale PGM corpus under data/corpus/ from the sample
images bundled with scikit-image, matplotlib and scikit-learn.

The train/test split is fixed; test images are never used for databases.
"""
import os
import sys

import numpy as np
from PIL import Image

try:
    import skimage.data as skd
    import matplotlib
    import sklearn.datasets as skds
except ImportError as exc:  # pragma: no cover
    sys.exit(f"missing dependency: {exc}")

SK = os.path.dirname(skd.__file__)
MPL = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "sample_data")
SKL = os.path.join(os.path.dirname(skds.__file__), "images")

# (source, crop box as fractions (x0, y0, x1, y1) of the source image)
TRAIN = [
    ("china", f"{SKL}/china.jpg", (0.0, 0.0, 1.0, 1.0)),
    ("flower", f"{SKL}/flower.jpg", (0.0, 0.0, 1.0, 1.0)),
    ("rocket", f"{SK}/rocket.jpg", (0.0, 0.0, 1.0, 1.0)),
    ("motorcycle_l", f"{SK}/motorcycle_left.png", (0.0, 0.0, 0.6, 1.0)),
    ("motorcycle_r", f"{SK}/motorcycle_right.png", (0.4, 0.0, 1.0, 1.0)),
    ("coins", f"{SK}/coins.png", (0.0, 0.0, 1.0, 1.0)),
    ("moon", f"{SK}/moon.png", (0.0, 0.0, 1.0, 1.0)),
    ("hubble_a", f"{SK}/hubble_deep_field.jpg", (0.0, 0.0, 0.5, 0.5)),
    ("hubble_b", f"{SK}/hubble_deep_field.jpg", (0.5, 0.5, 1.0, 1.0)),
    ("retina_a", f"{SK}/retina.jpg", (0.1, 0.1, 0.55, 0.55)),
    ("retina_b", f"{SK}/retina.jpg", (0.45, 0.45, 0.9, 0.9)),
    ("brick", f"{SK}/brick.png", (0.0, 0.0, 1.0, 1.0)),
    ("grass", f"{SK}/grass.png", (0.0, 0.0, 1.0, 1.0)),
    ("gravel", f"{SK}/gravel.png", (0.0, 0.0, 1.0, 1.0)),
    ("cell", f"{SK}/cell.png", (0.0, 0.0, 1.0, 1.0)),
    ("clock", f"{SK}/clock_motion.png", (0.0, 0.0, 1.0, 1.0)),
    ("page", f"{SK}/page.png", (0.0, 0.0, 1.0, 1.0)),
    ("text", f"{SK}/text.png", (0.0, 0.0, 1.0, 1.0)),
    ("ihc", f"{SK}/ihc.png", (0.0, 0.0, 1.0, 1.0)),
    ("color", f"{SK}/color.png", (0.0, 0.0, 1.0, 1.0)),
    ("coffee_cup", f"{SK}/coffee.png", (0.0, 0.0, 0.45, 1.0)),
    ("chelsea_bg", f"{SK}/chelsea.png", (0.0, 0.0, 0.4, 1.0)),
]

TEST = [
    ("camera", f"{SK}/camera.png"),
    ("astronaut", f"{SK}/astronaut.png"),
    ("hopper", f"{MPL}/grace_hopper.jpg"),
    ("coffee", f"{SK}/coffee.png"),
    ("chelsea", f"{SK}/chelsea.png"),
]

TRAIN_SHORT_SIDE = 240
TEST_SHORT_SIDE = 256
TEST_CROP = 160


def luma(path):
    img = Image.open(path)
    if img.mode in ("RGBA", "LA", "P"):
        img = img.convert("RGB")
    if img.mode != "L":
        # ITU-R BT.601, same weights as the C++ loader
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
        img = Image.fromarray(np.clip(np.rint(y), 0, 255).astype(np.uint8), "L")
    return img


def rescale(img, short_side):
    w, h = img.size
    s = short_side / min(w, h)
    if s < 1.0:
        img = img.resize((max(1, round(w * s)), max(1, round(h * s))), Image.BOX)
    return img


def main(root):
    train_dir = os.path.join(root, "train")
    test_dir = os.path.join(root, "test")
    os.makedirs(train_dir, exist_ok=True)
    os.makedirs(test_dir, exist_ok=True)
    for name, path, (x0, y0, x1, y1) in TRAIN:
        img = luma(path)
        w, h = img.size
        img = img.crop((round(x0 * w), round(y0 * h), round(x1 * w), round(y1 * h)))
        img = rescale(img, TRAIN_SHORT_SIDE)
        img.save(os.path.join(train_dir, f"{name}.pgm"))
    for name, path in TEST:
        img = rescale(luma(path), TEST_SHORT_SIDE)
        w, h = img.size
        x0, y0 = (w - TEST_CROP) // 2, (h - TEST_CROP) // 2
        img.crop((x0, y0, x0 + TEST_CROP, y0 + TEST_CROP)).save(
            os.path.join(test_dir, f"{name}.pgm"))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         os.path.join(os.path.dirname(__file__), "..", "data", "corpus"))
