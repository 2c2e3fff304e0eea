"""Compiled inner loops for the frequency-side double sums.

All kernels work on integer lattice coordinates (node = coord * spacing) and
take the radial factor as a lookup table over integer squared norms
(lut[m] = kernel(spacing * sqrt(m))), so the inner loops are pure gathers and
multiply-adds.  Parallelism is over output nodes only; each output value is
accumulated by a single thread in a fixed order, which keeps results bitwise
reproducible regardless of thread count.
"""
from __future__ import annotations

import numba
import numpy as np
from numba import prange


@numba.njit(parallel=True, cache=True)
def conv_sphere_2d(fa, fb, fsq, fv, g, mg, lut, mo):
    """out[p,q] = sum_t fv[t] * g[p-fa[t], q-fb[t]] * lut[fsq[t]+|pq-fab|^2]."""
    n_out = 2 * mo + 1
    nf = fa.size
    out = np.zeros((n_out, n_out), np.complex128)
    for ip in prange(n_out):
        p = ip - mo
        for iq in range(n_out):
            q = iq - mo
            acc = 0.0 + 0.0j
            for t in range(nf):
                ga = p - fa[t]
                gb = q - fb[t]
                if -mg <= ga <= mg and -mg <= gb <= mg:
                    gval = g[ga + mg, gb + mg]
                    if gval.real != 0.0 or gval.imag != 0.0:
                        msq = fsq[t] + ga * ga + gb * gb
                        acc += fv[t] * gval * lut[msq]
            out[ip, iq] = acc
    return out


@numba.njit(parallel=True, cache=True)
def conv_sphere_1d(fa, fsq, fv, g, mg, lut, mo):
    n_out = 2 * mo + 1
    nf = fa.size
    out = np.zeros(n_out, np.complex128)
    for ip in prange(n_out):
        p = ip - mo
        acc = 0.0 + 0.0j
        for t in range(nf):
            ga = p - fa[t]
            if -mg <= ga <= mg:
                gval = g[ga + mg]
                if gval.real != 0.0 or gval.imag != 0.0:
                    acc += fv[t] * gval * lut[fsq[t] + ga * ga]
        out[ip] = acc
    return out


@numba.njit(parallel=True, cache=True)
def nudft_1d(points, weights, mhalf, spacing):
    """Direct 1-d nonuniform transform on the symmetric lattice.

    Nodes are split into blocks owned by single threads; along a block the
    complex exponential advances by one multiply per node (re-anchored with an
    exact exponential at each block start), so each node's sum is accumulated
    in point order and results do not depend on the thread count.
    """
    n_nodes = 2 * mhalf + 1
    n_pts = points.size
    out = np.zeros(n_nodes, np.complex128)
    block = 8192
    n_blocks = (n_nodes + block - 1) // block
    for b in prange(n_blocks):
        lo = b * block
        hi = min(n_nodes, lo + block)
        for p in range(n_pts):
            x = points[p]
            w = weights[p]
            step = np.exp(-2j * np.pi * x * spacing)
            z = np.exp(-2j * np.pi * x * (lo - mhalf) * spacing)
            for m in range(lo, hi):
                out[m] += w * z
                z *= step
    return out


@numba.njit(parallel=True, cache=True)
def riesz_energy_pairs(points, weights, s):
    """sum_{i != j} w_i w_j |x_i - x_j|^{-s}, zero-distance pairs skipped."""
    n, d = points.shape
    partial = np.zeros(n, np.float64)
    for i in prange(n):
        acc = 0.0
        for j in range(i + 1, n):
            dist2 = 0.0
            for a in range(d):
                diff = points[i, a] - points[j, a]
                dist2 += diff * diff
            if dist2 > 0.0:
                acc += weights[i] * weights[j] * dist2 ** (-0.5 * s)
        partial[i] = acc
    return 2.0 * partial.sum()


@numba.njit(parallel=True, cache=True)
def conv_sphere_norms_2d(fa, fb, fsq, fv_t, g_t, mg, lut, mo):
    """Batched squared output norms: returns sum_{p,q} |out_t[p,q]|^2 per trial.

    fv_t has shape (nf, T) and g_t has shape (2mg+1, 2mg+1, T); both are
    gathered once per (output node, f node) pair so the trial loop is the
    innermost, contiguous axis.
    """
    n_out = 2 * mo + 1
    nf = fa.size
    n_tr = fv_t.shape[1]
    partial = np.zeros((n_out, n_tr), np.float64)
    for ip in prange(n_out):
        p = ip - mo
        acc = np.zeros(n_tr, np.complex128)
        for iq in range(n_out):
            q = iq - mo
            for t in range(n_tr):
                acc[t] = 0.0 + 0.0j
            for s in range(nf):
                ga = p - fa[s]
                gb = q - fb[s]
                if -mg <= ga <= mg and -mg <= gb <= mg:
                    kv = lut[fsq[s] + ga * ga + gb * gb]
                    if kv != 0.0:
                        for t in range(n_tr):
                            acc[t] += fv_t[s, t] * g_t[ga + mg, gb + mg, t] * kv
            for t in range(n_tr):
                partial[ip, t] += acc[t].real * acc[t].real + acc[t].imag * acc[t].imag
    return partial.sum(axis=0)
