"""Numba ``@njit`` twins of the kernels in `kernels_numpy`.

Semantics match the numpy path exactly (same padding, tie rules and
sampling conventions). Parallel loops only ever write disjoint slices, or
reduce per-batch partials in a fixed order afterwards, so results are
deterministic for a given input.
"""

import numpy as np
from numba import njit, prange

_JIT = dict(cache=True, nogil=True)


@njit(parallel=True, **_JIT)
def _conv3x3_forward(x, w, b):
    B, C, H, W = x.shape
    F = w.shape[0]
    xp = np.zeros((B, C, H + 2, W + 2))
    xp[:, :, 1:H + 1, 1:W + 1] = x
    y = np.empty((B, F, H, W))
    for bi in prange(B):
        for f in range(F):
            for i in range(H):
                for j in range(W):
                    acc = b[f]
                    for c in range(C):
                        for ki in range(3):
                            for kj in range(3):
                                acc += w[f, c, ki, kj] * xp[bi, c, i + ki, j + kj]
                    y[bi, f, i, j] = acc
    return y


def conv3x3_forward(x, w, b):
    return _conv3x3_forward(x, w, b)


@njit(parallel=True, **_JIT)
def _conv3x3_backward(x, w, gy):
    B, C, H, W = x.shape
    F = w.shape[0]
    xp = np.zeros((B, C, H + 2, W + 2))
    xp[:, :, 1:H + 1, 1:W + 1] = x
    gyp = np.zeros((B, F, H + 2, W + 2))
    gyp[:, :, 1:H + 1, 1:W + 1] = gy
    gx = np.empty((B, C, H, W))
    gw_part = np.zeros((B, F, C, 3, 3))
    gb_part = np.zeros((B, F))
    for bi in prange(B):
        for c in range(C):
            for i in range(H):
                for j in range(W):
                    acc = 0.0
                    for f in range(F):
                        for ki in range(3):
                            for kj in range(3):
                                acc += w[f, c, ki, kj] * gyp[bi, f, i + 2 - ki, j + 2 - kj]
                    gx[bi, c, i, j] = acc
        for f in range(F):
            s = 0.0
            for i in range(H):
                for j in range(W):
                    g = gy[bi, f, i, j]
                    s += g
                    for c in range(C):
                        for ki in range(3):
                            for kj in range(3):
                                gw_part[bi, f, c, ki, kj] += g * xp[bi, c, i + ki, j + kj]
            gb_part[bi, f] = s
    gw = np.zeros((F, C, 3, 3))
    gb = np.zeros(F)
    for bi in range(B):  # fixed-order reduction keeps results deterministic
        gw += gw_part[bi]
        gb += gb_part[bi]
    return gx, gw, gb


def conv3x3_backward(x, w, gy):
    return _conv3x3_backward(x, w, gy)


@njit(parallel=True, **_JIT)
def _maxpool2x2_forward(x):
    B, C, H, W = x.shape
    h, w = H // 2, W // 2
    y = np.empty((B, C, h, w))
    idx = np.empty((B, C, h, w), dtype=np.uint8)
    for bi in prange(B):
        for c in range(C):
            for i in range(h):
                for j in range(w):
                    best = x[bi, c, 2 * i, 2 * j]
                    k = np.uint8(0)
                    v = x[bi, c, 2 * i, 2 * j + 1]
                    if v > best:
                        best = v
                        k = np.uint8(1)
                    v = x[bi, c, 2 * i + 1, 2 * j]
                    if v > best:
                        best = v
                        k = np.uint8(2)
                    v = x[bi, c, 2 * i + 1, 2 * j + 1]
                    if v > best:
                        best = v
                        k = np.uint8(3)
                    y[bi, c, i, j] = best
                    idx[bi, c, i, j] = k
    return y, idx


def maxpool2x2_forward(x):
    return _maxpool2x2_forward(x)


@njit(parallel=True, **_JIT)
def _maxpool2x2_backward(gy, idx):
    B, C, h, w = gy.shape
    gx = np.zeros((B, C, 2 * h, 2 * w))
    for bi in prange(B):
        for c in range(C):
            for i in range(h):
                for j in range(w):
                    k = idx[bi, c, i, j]
                    gx[bi, c, 2 * i + (k >> 1), 2 * j + (k & 1)] = gy[bi, c, i, j]
    return gx


def maxpool2x2_backward(gy, idx):
    return _maxpool2x2_backward(gy, idx)


@njit(inline="always", **_JIT)
def _lerp_index(o, n):
    src = (o + 0.5) / 2.0 - 0.5
    i0 = int(np.floor(src))
    f = src - i0
    lo = min(max(i0, 0), n - 1)
    hi = min(max(i0 + 1, 0), n - 1)
    return lo, hi, f


@njit(parallel=True, **_JIT)
def _upsample2x_forward(x):
    B, C, H, W = x.shape
    y = np.empty((B, C, 2 * H, 2 * W))
    for bi in prange(B):
        for c in range(C):
            for oi in range(2 * H):
                r0, r1, fr = _lerp_index(oi, H)
                for oj in range(2 * W):
                    c0, c1, fc = _lerp_index(oj, W)
                    y[bi, c, oi, oj] = ((1.0 - fr) * (1.0 - fc) * x[bi, c, r0, c0]
                                        + (1.0 - fr) * fc * x[bi, c, r0, c1]
                                        + fr * (1.0 - fc) * x[bi, c, r1, c0]
                                        + fr * fc * x[bi, c, r1, c1])
    return y


def upsample2x_forward(x):
    return _upsample2x_forward(x)


@njit(parallel=True, **_JIT)
def _upsample2x_backward(gy):
    B, C, H2, W2 = gy.shape
    H, W = H2 // 2, W2 // 2
    gx = np.zeros((B, C, H, W))
    for bi in prange(B):
        for c in range(C):
            for oi in range(H2):
                r0, r1, fr = _lerp_index(oi, H)
                for oj in range(W2):
                    c0, c1, fc = _lerp_index(oj, W)
                    g = gy[bi, c, oi, oj]
                    gx[bi, c, r0, c0] += (1.0 - fr) * (1.0 - fc) * g
                    gx[bi, c, r0, c1] += (1.0 - fr) * fc * g
                    gx[bi, c, r1, c0] += fr * (1.0 - fc) * g
                    gx[bi, c, r1, c1] += fr * fc * g
    return gx


def upsample2x_backward(gy):
    return _upsample2x_backward(gy)


@njit(parallel=True, **_JIT)
def _pairwise_sqdist(a, b):
    N, d = a.shape
    M = b.shape[0]
    out = np.empty((N, M))
    for i in prange(N):
        for j in range(M):
            s = 0.0
            for k in range(d):
                t = a[i, k] - b[j, k]
                s += t * t
            out[i, j] = s
    return out


def pairwise_sqdist(a, b):
    return _pairwise_sqdist(a, b)


_LBP_DY = -np.sin(2.0 * np.pi * np.arange(8) / 8.0)
_LBP_DX = np.cos(2.0 * np.pi * np.arange(8) / 8.0)


@njit(parallel=True, **_JIT)
def _lbp_codes(img, dys, dxs):
    H, W = img.shape
    codes = np.zeros((H, W), dtype=np.uint8)
    for i in prange(H):
        for j in range(W):
            center = img[i, j]
            code = 0
            for p in range(8):
                i0 = int(np.floor(dys[p]))
                j0 = int(np.floor(dxs[p]))
                fr = dys[p] - i0
                fc = dxs[p] - j0
                r0 = min(max(i + i0, 0), H - 1)
                r1 = min(max(i + i0 + 1, 0), H - 1)
                c0 = min(max(j + j0, 0), W - 1)
                c1 = min(max(j + j0 + 1, 0), W - 1)
                sample = ((1.0 - fr) * (1.0 - fc) * img[r0, c0]
                          + (1.0 - fr) * fc * img[r0, c1]
                          + fr * (1.0 - fc) * img[r1, c0]
                          + fr * fc * img[r1, c1])
                if sample >= center:
                    code |= 1 << p
            codes[i, j] = np.uint8(code)
    return codes


def lbp_codes(img):
    return _lbp_codes(img, _LBP_DY, _LBP_DX)


@njit(**_JIT)
def _hog_cell_hist(mag, obin, cell, nbins):
    H, W = mag.shape
    ncy, ncx = H // cell, W // cell
    hist = np.zeros((ncy, ncx, nbins))
    for i in range(H):
        for j in range(W):
            k0 = int(np.floor(obin[i, j]))
            f = obin[i, j] - k0
            b_lo = k0 % nbins
            b_hi = (k0 + 1) % nbins
            cy = i // cell
            cx = j // cell
            hist[cy, cx, b_lo] += mag[i, j] * (1.0 - f)
            hist[cy, cx, b_hi] += mag[i, j] * f
    return hist


def hog_cell_hist(mag, obin, cell, nbins):
    return _hog_cell_hist(mag, obin, cell, nbins)


@njit(parallel=True, **_JIT)
def _perplexity_search(d2, target, tol, max_iter):
    N = d2.shape[0]
    p = np.zeros((N, N))
    beta = np.empty(N)
    for i in prange(N):
        b = 1.0
        bmin = -np.inf
        bmax = np.inf
        for _ in range(max_iter):
            s = 0.0
            sd = 0.0
            for j in range(N):
                if j != i:
                    e = np.exp(-d2[i, j] * b)
                    s += e
                    sd += d2[i, j] * e
            if s < 1e-300:
                s = 1e-300
            perp = np.exp(np.log(s) + b * sd / s)
            diff = perp - target
            if abs(diff) <= tol:
                break
            if diff > 0.0:
                bmin = b
                b = b * 2.0 if np.isinf(bmax) else (b + bmax) / 2.0
            else:
                bmax = b
                b = b / 2.0 if np.isinf(bmin) else (b + bmin) / 2.0
        beta[i] = b
        s = 0.0
        for j in range(N):
            if j != i:
                e = np.exp(-d2[i, j] * b)
                p[i, j] = e
                s += e
        if s < 1e-300:
            s = 1e-300
        for j in range(N):
            p[i, j] /= s
    return p, beta


def perplexity_search(d2, target, tol, max_iter):
    return _perplexity_search(d2, float(target), float(tol), int(max_iter))
