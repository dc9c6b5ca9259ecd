"""Straightforward per-pixel window scan used as a reference for hole filling."""
import numpy as np

from rangeunfold.projection import ALL_CHANNELS, VALUE_CHANNELS, Channel, RangeImage


def random_image(rng, h=64, w=256, invalid_frac=0.3, num_labels=6):
    data = np.zeros((h, w, len(ALL_CHANNELS)))
    valid = rng.uniform(size=(h, w)) >= invalid_frac
    n = int(valid.sum())
    # coarse ranges so exact ties occur
    data[valid, Channel.RANGE] = rng.integers(1, 40, n) * 0.5
    data[valid, Channel.X] = rng.normal(size=n)
    data[valid, Channel.Y] = rng.normal(size=n)
    data[valid, Channel.Z] = rng.normal(size=n)
    data[valid, Channel.INTENSITY] = rng.uniform(size=n)
    data[valid, Channel.MASK] = 1.0
    data[valid, Channel.LABEL] = rng.integers(1, num_labels, n)
    return RangeImage(data)


def knni_reference(image, k, variant, wrap=False, ignore_label=0):
    h, w = image.shape
    half = k // 2
    src = image.data
    valid = image.mask
    rng = image[Channel.RANGE]
    out = src.copy()
    filled = ignored = 0
    for r in range(h):
        for c in range(w):
            if valid[r, c]:
                continue
            cands = []
            for s in list(range(-half, 0)) + list(range(1, half + 1)):
                cc = c + s
                if wrap:
                    cc %= w
                elif cc < 0 or cc >= w:
                    continue
                if valid[r, cc]:
                    cands.append((s, cc))
            if not cands:
                continue
            best = None
            for s, cc in cands:
                if best is None or rng[r, cc] < rng[r, best]:
                    best = cc
            filled += 1
            if variant == "B":
                for ch in VALUE_CHANNELS:
                    out[r, c, ch] = sum(src[r, cc, ch] for _, cc in cands) / len(cands)
                out[r, c, Channel.MASK] = 1.0
                out[r, c, Channel.LABEL] = src[r, best, Channel.LABEL]
            else:
                out[r, c, :] = src[r, best, :]
                if variant == "C":
                    left = [cc for s, cc in cands if s < 0]
                    right = [cc for s, cc in cands if s > 0]
                    if left and right:
                        # nearest on each side: the last left, the first right
                        if src[r, left[-1], Channel.LABEL] != src[r, right[0], Channel.LABEL]:
                            out[r, c, Channel.LABEL] = ignore_label
                            ignored += 1
            out[r, c, Channel.FILLED] = 1.0
    remaining = int((~valid).sum()) - filled
    return RangeImage(out, image.channels), (filled, remaining, ignored)
