"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written with different algorithms than the
library code (cyclic Jacobi rotations instead of LAPACK, stack-based graph
search instead of sparse component labeling, direct six-loop convolution
sums) so agreement is meaningful.
"""

import math

import numpy as np


def jacobi_eigenvalues(mat: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(mat, dtype=float)
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0]])
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max()
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (10 * n):
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


def graph_connected(weights: np.ndarray) -> bool:
    """Reachability of all nodes from node 0 over positive-weight edges."""
    n = weights.shape[0]
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in range(n):
            if not seen[j] and weights[i, j] > 0.0:
                seen[j] = True
                stack.append(j)
    return all(seen)


def erf_rate(d: float, power_mw: float, noise_mw: float, gain: float, exponent: float) -> float:
    """Untruncated rate model evaluated with the math library only."""
    if d <= 0.0:
        return 1.0
    snr = power_mw * gain * d ** (-exponent) / noise_mw
    return math.erf(math.sqrt(snr))


def plain_bisect(f, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Sign-change bisection; assumes f(lo) and f(hi) bracket a root."""
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0.0) == (f_lo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def two_node_power_threshold(d: float, cutoff_distance_0dbm: float, exponent: float) -> float:
    """Closed-form dBm threshold connecting two nodes at distance d.

    The rate curve is a horizontal dilation of the 0 dBm curve by the
    factor (P mW)^(1/n), so d_c(P) = d solves to P = n * 10 * log10(d/d_c0).
    """
    return exponent * 10.0 * math.log10(d / cutoff_distance_0dbm)


def naive_conv2d(x, w, b, stride, padding):
    """Direct-summation strided convolution, channels-first (C,H,W)."""
    c_in, h, width = x.shape
    c_out, _, kh, kw = w.shape
    xp = np.zeros((c_in, h + 2 * padding, width + 2 * padding))
    xp[:, padding : padding + h, padding : padding + width] = x
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    out = np.zeros((c_out, out_h, out_w))
    for co in range(c_out):
        for i in range(out_h):
            for j in range(out_w):
                acc = 0.0
                for ci in range(c_in):
                    for di in range(kh):
                        for dj in range(kw):
                            acc += w[co, ci, di, dj] * xp[ci, i * stride + di, j * stride + dj]
                out[co, i, j] = acc + b[co]
    return out


def naive_conv_transpose2d(x, w, b, stride, padding, output_padding):
    """Direct-summation transposed convolution, channels-first (C,H,W)."""
    c_in, h, width = x.shape
    c_out, _, kh, kw = w.shape
    full_h = (h - 1) * stride + kh
    full_w = (width - 1) * stride + kw
    buf = np.zeros((c_out, full_h, full_w))
    for ci in range(c_in):
        for i in range(h):
            for j in range(width):
                for co in range(c_out):
                    for di in range(kh):
                        for dj in range(kw):
                            buf[co, i * stride + di, j * stride + dj] += (
                                w[co, ci, di, dj] * x[ci, i, j]
                            )
    out_h = (h - 1) * stride - 2 * padding + kh + output_padding
    out_w = (width - 1) * stride - 2 * padding + kw + output_padding
    out = np.zeros((c_out, out_h, out_w))
    crop = buf[:, padding : padding + out_h, padding : padding + out_w]
    out[:, : crop.shape[1], : crop.shape[2]] = crop
    return out + b[:, None, None]


