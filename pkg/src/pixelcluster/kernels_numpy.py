"""Pure-numpy implementations of the hot kernels.

This is the fallback path; `kernels_numba` provides loop-level twins with
identical semantics. All image tensors are float64 in [B, C, H, W] layout.
Convolutions are 3x3, stride 1, zero same-padding; pooling is 2x2; bilinear
upsampling uses the align-corners=false sampling convention.
"""

import numpy as np

# ---------------------------------------------------------------------------
# 3x3 same-padding convolution


def conv3x3_forward(x, w, b):
    """x [B,C,H,W], w [F,C,3,3], b [F] -> y [B,F,H,W]."""
    B, C, H, W = x.shape
    F = w.shape[0]
    xp = np.zeros((B, C, H + 2, W + 2))
    xp[:, :, 1:H + 1, 1:W + 1] = x
    acc = np.zeros((B, H, W, F))
    for ki in range(3):
        for kj in range(3):
            acc += np.tensordot(xp[:, :, ki:ki + H, kj:kj + W], w[:, :, ki, kj],
                                axes=([1], [1]))
    acc += b
    return np.ascontiguousarray(acc.transpose(0, 3, 1, 2))


def conv3x3_backward(x, w, gy):
    """Gradients of conv3x3_forward: returns (gx, gw, gb)."""
    B, C, H, W = x.shape
    F = w.shape[0]
    xp = np.zeros((B, C, H + 2, W + 2))
    xp[:, :, 1:H + 1, 1:W + 1] = x
    gxp = np.zeros((B, C, H + 2, W + 2))
    gw = np.zeros_like(w)
    for ki in range(3):
        for kj in range(3):
            patch = xp[:, :, ki:ki + H, kj:kj + W]
            gw[:, :, ki, kj] = np.tensordot(gy, patch, axes=([0, 2, 3], [0, 2, 3]))
            contrib = np.tensordot(gy, w[:, :, ki, kj], axes=([1], [0]))
            gxp[:, :, ki:ki + H, kj:kj + W] += contrib.transpose(0, 3, 1, 2)
    gb = gy.sum(axis=(0, 2, 3))
    gx = gxp[:, :, 1:H + 1, 1:W + 1].copy()
    return gx, gw, gb


# ---------------------------------------------------------------------------
# 2x2 max pooling

def maxpool2x2_forward(x):
    """x [B,C,H,W] with even H,W -> (y [B,C,H/2,W/2], idx uint8 in 0..3).

    idx encodes the argmax position inside each block in row-major order
    ((0,0),(0,1),(1,0),(1,1)); ties resolve to the first maximum.
    """
    B, C, H, W = x.shape
    blocks = x.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(B, C, H // 2, W // 2, 4)
    idx = flat.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(flat, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return y, idx


def maxpool2x2_backward(gy, idx):
    """Route gy [B,C,h,w] back to the recorded argmax positions."""
    B, C, h, w = gy.shape
    flat = np.zeros((B, C, h, w, 4))
    np.put_along_axis(flat, idx[..., None].astype(np.intp), gy[..., None], axis=-1)
    gx = flat.reshape(B, C, h, w, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return gx.reshape(B, C, 2 * h, 2 * w).copy()


# ---------------------------------------------------------------------------
# 2x bilinear upsampling (align-corners=false)

_UPSAMPLE_MATRICES: dict[int, np.ndarray] = {}


def _upsample_matrix(n: int) -> np.ndarray:
    """[2n, n] interpolation matrix for one axis; rows sum to 1."""
    m = _UPSAMPLE_MATRICES.get(n)
    if m is None:
        m = np.zeros((2 * n, n))
        for o in range(2 * n):
            src = (o + 0.5) / 2.0 - 0.5
            i0 = int(np.floor(src))
            f = src - i0
            lo = min(max(i0, 0), n - 1)
            hi = min(max(i0 + 1, 0), n - 1)
            m[o, lo] += 1.0 - f
            m[o, hi] += f
        _UPSAMPLE_MATRICES[n] = m
    return m


def upsample2x_forward(x):
    """x [B,C,H,W] -> y [B,C,2H,2W]."""
    H, W = x.shape[2], x.shape[3]
    R = _upsample_matrix(H)
    Cm = _upsample_matrix(W)
    t = np.tensordot(x, R, axes=([2], [1]))        # [B,C,W,2H]
    y = np.tensordot(t, Cm, axes=([2], [1]))       # [B,C,2H,2W]
    return np.ascontiguousarray(y)


def upsample2x_backward(gy):
    """Exact adjoint of upsample2x_forward: gy [B,C,2H,2W] -> gx [B,C,H,W]."""
    H, W = gy.shape[2] // 2, gy.shape[3] // 2
    R = _upsample_matrix(H)
    Cm = _upsample_matrix(W)
    t = np.tensordot(gy, R, axes=([2], [0]))       # [B,C,2W,H]
    gx = np.tensordot(t, Cm, axes=([2], [0]))      # [B,C,H,W]
    return np.ascontiguousarray(gx)


# ---------------------------------------------------------------------------
# Pairwise squared Euclidean distances

def pairwise_sqdist(a, b):
    """a [N,d], b [M,d] -> D [N,M] of squared distances, clipped to >= 0."""
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d


# ---------------------------------------------------------------------------
# Local binary pattern codes (radius 1, 8 circular neighbors, bilinear)

_LBP_OFFSETS = [(-np.sin(2.0 * np.pi * p / 8.0), np.cos(2.0 * np.pi * p / 8.0))
                for p in range(8)]


def lbp_codes(img):
    """img [H,W] -> uint8 code map; bit p set when neighbor p >= center.

    Neighbors are sampled at radius 1 with bilinear interpolation; the image
    border is replicate-padded so every pixel gets a code.
    """
    H, W = img.shape
    ip = np.pad(img, 1, mode="edge")
    codes = np.zeros((H, W), dtype=np.uint8)
    for p, (dy, dx) in enumerate(_LBP_OFFSETS):
        i0 = int(np.floor(dy))
        j0 = int(np.floor(dx))
        fr = dy - i0
        fc = dx - j0
        a = ip[1 + i0:1 + i0 + H, 1 + j0:1 + j0 + W]
        bpl = ip[1 + i0:1 + i0 + H, 2 + j0:2 + j0 + W]
        c = ip[2 + i0:2 + i0 + H, 1 + j0:1 + j0 + W]
        d = ip[2 + i0:2 + i0 + H, 2 + j0:2 + j0 + W]
        sample = ((1.0 - fr) * (1.0 - fc) * a + (1.0 - fr) * fc * bpl
                  + fr * (1.0 - fc) * c + fr * fc * d)
        codes |= (sample >= img).astype(np.uint8) << p
    return codes


# ---------------------------------------------------------------------------
# HOG cell voting

def hog_cell_hist(mag, obin, cell, nbins):
    """Accumulate orientation votes into per-cell histograms.

    mag, obin: [H,W]; obin is the continuous bin coordinate in [-0.5, nbins-0.5).
    Each pixel votes its magnitude, split linearly between the two nearest
    bin centers (circular wrap). Returns [H/cell, W/cell, nbins].
    """
    H, W = mag.shape
    ncy, ncx = H // cell, W // cell
    k0 = np.floor(obin).astype(np.int64)
    f = obin - k0
    b_lo = np.mod(k0, nbins)
    b_hi = np.mod(k0 + 1, nbins)
    rows = np.arange(H)[:, None] // cell
    cols = np.arange(W)[None, :] // cell
    base = (rows * ncx + cols) * nbins
    size = ncy * ncx * nbins
    hist = np.bincount((base + b_lo).ravel(), weights=(mag * (1.0 - f)).ravel(),
                       minlength=size)
    hist += np.bincount((base + b_hi).ravel(), weights=(mag * f).ravel(),
                        minlength=size)
    return hist.reshape(ncy, ncx, nbins)


# ---------------------------------------------------------------------------
# Perplexity-matching bandwidth search (Gaussian conditionals)

def perplexity_search(d2, target, tol, max_iter):
    """Per-row binary search of Gaussian precisions beta.

    d2 [N,N]: squared distances. Returns (P [N,N] conditional rows with zero
    diagonal, beta [N]) such that each row's perplexity exp(H) matches
    `target` within `tol` (or max_iter bisections).
    """
    N = d2.shape[0]
    beta = np.ones(N)
    beta_min = np.full(N, -np.inf)
    beta_max = np.full(N, np.inf)
    eye = np.arange(N)
    active = np.ones(N, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        rows = np.where(active)[0]
        e = np.exp(-d2[rows] * beta[rows, None])
        e[np.arange(len(rows)), rows] = 0.0
        s = e.sum(axis=1)
        s = np.maximum(s, 1e-300)
        sd = (d2[rows] * e).sum(axis=1)
        h = np.log(s) + beta[rows] * sd / s
        perp = np.exp(h)
        diff = perp - target
        done = np.abs(diff) <= tol
        active[rows[done]] = False
        rem = rows[~done]
        if len(rem) == 0:
            continue
        d = diff[~done]
        hi = d > 0.0  # perplexity too high -> increase beta
        idx_hi = rem[hi]
        beta_min[idx_hi] = beta[idx_hi]
        beta[idx_hi] = np.where(np.isinf(beta_max[idx_hi]), beta[idx_hi] * 2.0,
                                (beta[idx_hi] + beta_max[idx_hi]) / 2.0)
        idx_lo = rem[~hi]
        beta_max[idx_lo] = beta[idx_lo]
        beta[idx_lo] = np.where(np.isinf(beta_min[idx_lo]), beta[idx_lo] / 2.0,
                                (beta[idx_lo] + beta_min[idx_lo]) / 2.0)
    p = np.exp(-d2 * beta[:, None])
    p[eye, eye] = 0.0
    p /= np.maximum(p.sum(axis=1, keepdims=True), 1e-300)
    return p, beta
