"""Pure numpy kernels. Same contract as the compiled ``_kernels`` module.

All functions take contiguous arrays of the exact dtypes noted and never
modify their inputs.
"""
import numpy as np

NAME = "python"


def azimuths_filled(xyz):
    """Azimuth in degrees, [0, 360); points with x = y = 0 or non-finite
    coordinates take the previous point's value (0 before any valid one).
    Returns (theta, number of filled entries)."""
    x, y = xyz[:, 0], xyz[:, 1]
    with np.errstate(invalid="ignore"):
        theta = np.arctan2(y, x) * (180.0 / np.pi)
    theta[theta < 0.0] += 360.0
    theta[theta >= 360.0] = 0.0
    bad = ((x == 0.0) & (y == 0.0)) | ~np.isfinite(theta)
    n_bad = int(bad.sum())
    if n_bad:
        idx = np.where(bad, 0, np.arange(theta.size))
        np.maximum.accumulate(idx, out=idx)
        theta = theta[idx]
        if bad[0]:
            theta[idx == 0] = 0.0
    return theta, n_bad


def ring_fold(theta, t):
    """Ring index per point: a new ring starts when the azimuth drops or jumps by more than t."""
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.size
    rings = np.zeros(n, dtype=np.int64)
    if n > 1:
        d = np.diff(theta)
        same = (d >= 0.0) & (np.abs(d) <= t)
        np.cumsum(~same, out=rings[1:])
    return rings


def scatter_min(v, u, rng, valid, height, width):
    """Owner point of each pixel (flat, -1 if empty): smallest range, then lowest index."""
    owner = np.full(height * width, -1, dtype=np.int64)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return owner
    pix = v[idx] * width + u[idx]
    order = np.lexsort((idx, rng[idx], pix))
    pix_sorted = pix[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    owner[pix_sorted[first]] = idx[order[first]]
    return owner


def rasterize(xyz, intensity, labels, v, u, height, width):
    """Scatter points into an (H, W, 8) image in channel-id order
    (range, x, y, z, intensity, mask, label, filled).

    Points that are non-finite or at the origin are skipped. Returns
    (owner, data) with ``owner`` the flat pixel -> point index map.
    """
    rng = np.sqrt(xyz[:, 0] * xyz[:, 0] + xyz[:, 1] * xyz[:, 1] + xyz[:, 2] * xyz[:, 2])
    valid = np.isfinite(rng) & (rng > 0.0)
    owner = scatter_min(v, u, rng, valid, height, width)
    data = np.zeros((height * width, 8))
    hit = np.flatnonzero(owner >= 0)
    src = owner[hit]
    data[hit, 0] = rng[src]
    data[hit, 1:4] = xyz[src]
    if intensity is not None:
        data[hit, 4] = intensity[src]
    data[hit, 5] = 1.0
    if labels is not None:
        data[hit, 6] = labels[src]
    return owner, data.reshape(height, width, 8)


def _cross(a, b):
    return np.stack(
        (
            a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
            a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
            a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
        ),
        axis=1,
    )


def skew_points(xyz, alpha, phi, vel, inverse):
    """Per-point constant-velocity transform.

    forward: Exp(a*phi)^T (p - a*v);  inverse: Exp(a*phi) p + a*v
    """
    k = alpha[:, None] * phi[None, :]
    theta2 = k[:, 0] * k[:, 0] + k[:, 1] * k[:, 1] + k[:, 2] * k[:, 2]
    theta = np.sqrt(theta2)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    if inverse:
        p = xyz
        kp = _cross(k, p)
        kkp = _cross(k, kp)
        return p + a[:, None] * kp + b[:, None] * kkp + alpha[:, None] * vel[None, :]
    p = xyz - alpha[:, None] * vel[None, :]
    kp = _cross(k, p)
    kkp = _cross(k, kp)
    return p - a[:, None] * kp + b[:, None] * kkp


def knni_fill(data, mask, range_ch, value_chs, half, wrap, want_mean):
    """Neighbour search for every invalid pixel within +-half columns of its row.

    ``data`` is (H, W, C); ``value_chs`` selects the channels averaged into
    ``mean``. Returns (best_u, left_u, right_u, count, mean). best_u is the column of
    the smallest-range valid neighbour (ties: leftmost offset), left_u /
    right_u the nearest valid column on each side, -1 when absent. mean
    has shape (H, W, C) when want_mean, else (0, 0, 0).
    """
    values = data[:, :, value_chs]
    h, w, c = values.shape
    rng = data[:, :, range_ch]
    valid = mask.astype(bool)
    hole = ~valid
    cols = np.arange(w)
    best_u = np.full((h, w), -1, dtype=np.int64)
    best_r = np.full((h, w), np.inf)
    left_u = np.full((h, w), -1, dtype=np.int64)
    right_u = np.full((h, w), -1, dtype=np.int64)
    count = np.zeros((h, w), dtype=np.int64)
    total = np.zeros((h, w, c)) if want_mean else None
    offsets = list(range(-half, 0)) + list(range(1, half + 1))
    for s in offsets:
        q = cols + s
        if wrap:
            q %= w
            inside = np.ones(w, dtype=bool)
        else:
            inside = (q >= 0) & (q < w)
            q = np.clip(q, 0, w - 1)
        hit = hole & inside[None, :] & valid[:, q]
        r = rng[:, q]
        take = hit & (r < best_r)
        qq = np.broadcast_to(q, (h, w))
        best_u[take] = qq[take]
        best_r[take] = r[take]
        count += hit
        if want_mean:
            total += np.where(hit[:, :, None], values[:, q, :], 0.0)
    for s in range(1, half + 1):
        for sign, side in ((-1, left_u), (1, right_u)):
            q = cols + sign * s
            if wrap:
                q %= w
                inside = np.ones(w, dtype=bool)
            else:
                inside = (q >= 0) & (q < w)
                q = np.clip(q, 0, w - 1)
            hit = hole & inside[None, :] & valid[:, q] & (side < 0)
            side[hit] = np.broadcast_to(q, (h, w))[hit]
    if want_mean:
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(count[:, :, None] > 0, total / np.maximum(count, 1)[:, :, None], 0.0)
    else:
        mean = np.zeros((0, 0, 0))
    return best_u, left_u, right_u, count, mean


def nla_assign(point_range, v, u, img_range, mask, labels, half, wrap):
    """Label of the window pixel whose range is closest to each point's range."""
    h, w = img_range.shape
    n = point_range.size
    best_d = np.full(n, np.inf)
    out = labels[v, u].astype(np.int64)
    valid = mask.astype(bool)
    for dv in range(-half, half + 1):
        row = v + dv
        row_ok = (row >= 0) & (row < h)
        row = np.clip(row, 0, h - 1)
        for du in range(-half, half + 1):
            col = u + du
            if wrap:
                col = col % w
                ok = row_ok
            else:
                ok = row_ok & (col >= 0) & (col < w)
                col = np.clip(col, 0, w - 1)
            ok = ok & valid[row, col]
            d = np.abs(img_range[row, col] - point_range)
            take = ok & (d < best_d)
            best_d[take] = d[take]
            out[take] = labels[row[take], col[take]]
    return out
