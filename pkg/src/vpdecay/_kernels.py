"""Compiled inner loops: pairwise fields, octree build/walk, kernel deposits.

Everything here is deterministic: reductions run in fixed index order and
no randomness is involved, so repeated calls on identical inputs return
bit-identical results.  All field kernels share one softened interaction

    k_eps(d) = d / (|d|^2 + eps^2)^(3/2)

(the 1/(4 pi) Coulomb prefactor is applied by the callers), and pairs at
exactly zero displacement are skipped, which both removes self-interaction
and keeps coincident opposite charges finite at eps = 0.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LEAF_MAX = 24
_MAX_DEPTH = 48


@njit(cache=True)
def fnv1a64_bytes(buf):
    """64-bit FNV-1a over a uint8 array; wraps modulo 2^64 like the C version."""
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for i in range(buf.shape[0]):
        h = (h ^ np.uint64(buf[i])) * prime
    return h


@njit(cache=True)
def pairwise_field(src, w, tgt, eps2):
    """Sum of softened kernels over sources, for each target; shape (m, 3)."""
    m = tgt.shape[0]
    n = src.shape[0]
    out = np.zeros((m, 3))
    for i in range(m):
        tx, ty, tz = tgt[i, 0], tgt[i, 1], tgt[i, 2]
        ax = ay = az = 0.0
        for j in range(n):
            dx = tx - src[j, 0]
            dy = ty - src[j, 1]
            dz = tz - src[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                continue
            inv = w[j] / ((r2 + eps2) * np.sqrt(r2 + eps2))
            ax += dx * inv
            ay += dy * inv
            az += dz * inv
        out[i, 0] = ax
        out[i, 1] = ay
        out[i, 2] = az
    return out


@njit(cache=True)
def build_octree(pos, w, leaf_max):
    """Insert particles into a pointer-octree held in flat arrays.

    Returns (center, half, child, head, nxt, charge, com, quad, n_nodes).
    ``child`` is (K, 8) with -1 for absent children; leaves keep their
    particles on a linked list head/nxt.  ``charge``/``com``/``quad`` hold
    subtree mass, center of mass, and com-centered second moments
    (xx, yy, zz, xy, xz, yz), filled in a reverse-order upward pass.
    Weights must be nonnegative (one tree per species).
    """
    n = pos.shape[0]
    cap = 2 * n + 64

    center = np.zeros((cap, 3))
    half = np.zeros(cap)
    child = np.full((cap, 8), -1, dtype=np.int64)
    is_leaf = np.ones(cap, dtype=np.uint8)
    head = np.full(cap, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    depth_of = np.zeros(cap, dtype=np.int64)

    lo = np.array([pos[:, 0].min(), pos[:, 1].min(), pos[:, 2].min()])
    hi = np.array([pos[:, 0].max(), pos[:, 1].max(), pos[:, 2].max()])
    c0 = 0.5 * (lo + hi)
    h0 = 0.5 * max(hi[0] - lo[0], max(hi[1] - lo[1], hi[2] - lo[2]))
    if h0 <= 0.0:
        h0 = 1.0
    h0 *= 1.0 + 1e-12
    center[0] = c0
    half[0] = h0
    n_nodes = 1

    for p in range(n):
        node = 0
        while True:
            count[node] += 1
            if is_leaf[node]:
                if (count[node] <= leaf_max or depth_of[node] >= _MAX_DEPTH):
                    nxt[p] = head[node]
                    head[node] = p
                    break
                # split: push the existing list one level down
                is_leaf[node] = 0
                q = head[node]
                head[node] = -1
                while q != -1:
                    q_next = nxt[q]
                    oct_q = ((1 if pos[q, 0] > center[node, 0] else 0)
                             + (2 if pos[q, 1] > center[node, 1] else 0)
                             + (4 if pos[q, 2] > center[node, 2] else 0))
                    ch = child[node, oct_q]
                    if ch == -1:
                        ch = n_nodes
                        n_nodes += 1
                        child[node, oct_q] = ch
                        hh = 0.5 * half[node]
                        center[ch, 0] = center[node, 0] + (hh if oct_q & 1 else -hh)
                        center[ch, 1] = center[node, 1] + (hh if oct_q & 2 else -hh)
                        center[ch, 2] = center[node, 2] + (hh if oct_q & 4 else -hh)
                        half[ch] = hh
                        depth_of[ch] = depth_of[node] + 1
                    nxt[q] = head[ch]
                    head[ch] = q
                    count[ch] += 1
                    q = q_next
                # fall through: re-dispatch p from this now-internal node
            oct_p = ((1 if pos[p, 0] > center[node, 0] else 0)
                     + (2 if pos[p, 1] > center[node, 1] else 0)
                     + (4 if pos[p, 2] > center[node, 2] else 0))
            ch = child[node, oct_p]
            if ch == -1:
                ch = n_nodes
                n_nodes += 1
                child[node, oct_p] = ch
                hh = 0.5 * half[node]
                center[ch, 0] = center[node, 0] + (hh if oct_p & 1 else -hh)
                center[ch, 1] = center[node, 1] + (hh if oct_p & 2 else -hh)
                center[ch, 2] = center[node, 2] + (hh if oct_p & 4 else -hh)
                half[ch] = hh
                depth_of[ch] = depth_of[node] + 1
            node = ch

    charge = np.zeros(n_nodes)
    com = np.zeros((n_nodes, 3))
    quad = np.zeros((n_nodes, 6))
    # children always carry larger indices, so one reverse sweep suffices
    for node in range(n_nodes - 1, -1, -1):
        if is_leaf[node]:
            q = head[node]
            while q != -1:
                charge[node] += w[q]
                com[node, 0] += w[q] * pos[q, 0]
                com[node, 1] += w[q] * pos[q, 1]
                com[node, 2] += w[q] * pos[q, 2]
                q = nxt[q]
            if charge[node] > 0.0:
                com[node] /= charge[node]
            q = head[node]
            while q != -1:
                sx = pos[q, 0] - com[node, 0]
                sy = pos[q, 1] - com[node, 1]
                sz = pos[q, 2] - com[node, 2]
                quad[node, 0] += w[q] * sx * sx
                quad[node, 1] += w[q] * sy * sy
                quad[node, 2] += w[q] * sz * sz
                quad[node, 3] += w[q] * sx * sy
                quad[node, 4] += w[q] * sx * sz
                quad[node, 5] += w[q] * sy * sz
                q = nxt[q]
        else:
            for k in range(8):
                ch = child[node, k]
                if ch != -1:
                    charge[node] += charge[ch]
                    com[node, 0] += charge[ch] * com[ch, 0]
                    com[node, 1] += charge[ch] * com[ch, 1]
                    com[node, 2] += charge[ch] * com[ch, 2]
            if charge[node] > 0.0:
                com[node] /= charge[node]
            for k in range(8):
                ch = child[node, k]
                if ch == -1:
                    continue
                sx = com[ch, 0] - com[node, 0]
                sy = com[ch, 1] - com[node, 1]
                sz = com[ch, 2] - com[node, 2]
                quad[node, 0] += quad[ch, 0] + charge[ch] * sx * sx
                quad[node, 1] += quad[ch, 1] + charge[ch] * sy * sy
                quad[node, 2] += quad[ch, 2] + charge[ch] * sz * sz
                quad[node, 3] += quad[ch, 3] + charge[ch] * sx * sy
                quad[node, 4] += quad[ch, 4] + charge[ch] * sx * sz
                quad[node, 5] += quad[ch, 5] + charge[ch] * sy * sz
    return (center[:n_nodes], half[:n_nodes], child[:n_nodes], is_leaf[:n_nodes],
            head, nxt, charge, com, quad)


@njit(cache=True)
def tree_field(center, half, child, is_leaf, head, nxt, charge, com, quad,
               pos, w, tgt, theta, eps2):
    """Far-field multipole (monopole + com-centered quadrupole) walk.

    A cell of side s at softened com distance d is accepted when
    s/d < theta and the target lies outside the cell box; otherwise its
    children are visited, with leaves summed particle by particle exactly
    like the pairwise kernel.
    """
    m = tgt.shape[0]
    out = np.zeros((m, 3))
    theta2 = theta * theta
    stack = np.zeros(512, dtype=np.int64)
    for i in range(m):
        tx, ty, tz = tgt[i, 0], tgt[i, 1], tgt[i, 2]
        ax = ay = az = 0.0
        top = 0
        stack[0] = 0
        while top >= 0:
            node = stack[top]
            top -= 1
            if is_leaf[node]:
                q = head[node]
                while q != -1:
                    dx = tx - pos[q, 0]
                    dy = ty - pos[q, 1]
                    dz = tz - pos[q, 2]
                    r2 = dx * dx + dy * dy + dz * dz
                    if r2 > 0.0:
                        inv = w[q] / ((r2 + eps2) * np.sqrt(r2 + eps2))
                        ax += dx * inv
                        ay += dy * inv
                        az += dz * inv
                    q = nxt[q]
                continue
            dx = tx - com[node, 0]
            dy = ty - com[node, 1]
            dz = tz - com[node, 2]
            r2 = dx * dx + dy * dy + dz * dz
            side = 2.0 * half[node]
            inside = (abs(tx - center[node, 0]) <= half[node]
                      and abs(ty - center[node, 1]) <= half[node]
                      and abs(tz - center[node, 2]) <= half[node])
            if inside or side * side >= theta2 * r2:
                for k in range(8):
                    ch = child[node, k]
                    if ch != -1:
                        top += 1
                        stack[top] = ch
                continue
            R2 = r2 + eps2
            R = np.sqrt(R2)
            inv3 = 1.0 / (R2 * R)
            inv5 = inv3 / R2
            inv7 = inv5 / R2
            Q = charge[node]
            ax += Q * dx * inv3
            ay += Q * dy * inv3
            az += Q * dz * inv3
            mxx, myy, mzz = quad[node, 0], quad[node, 1], quad[node, 2]
            mxy, mxz, myz = quad[node, 3], quad[node, 4], quad[node, 5]
            tr = mxx + myy + mzz
            mdx = mxx * dx + mxy * dy + mxz * dz
            mdy = mxy * dx + myy * dy + myz * dz
            mdz = mxz * dx + myz * dy + mzz * dz
            dmd = dx * mdx + dy * mdy + dz * mdz
            c5 = -1.5 * inv5
            c7 = 7.5 * dmd * inv7
            ax += c5 * (2.0 * mdx + tr * dx) + c7 * dx
            ay += c5 * (2.0 * mdy + tr * dy) + c7 * dy
            az += c5 * (2.0 * mdz + tr * dz) + c7 * dz
        out[i, 0] = ax
        out[i, 1] = ay
        out[i, 2] = az
    return out


@njit(cache=True)
def kernel_deposit(points, coefs, lo, spacing, h, orders, out):
    """Scatter coefs * product of per-axis kernel-derivative values onto a grid.

    The base kernel is (35/32)(1 - z^2)^3 on [-1, 1] (C^2); ``orders``
    selects the 0th..3rd derivative per axis, each scaled by 1/h^(1+order).
    Deposition runs in particle order, so results are reproducible.
    """
    n = points.shape[0]
    for p in range(n):
        cs = coefs[p]
        if cs == 0.0:
            continue
        ok = True
        i0 = np.zeros(3, dtype=np.int64)
        i1 = np.zeros(3, dtype=np.int64)
        for ax in range(3):
            nn = out.shape[ax]
            a = int(np.ceil((points[p, ax] - h[ax] - lo[ax]) / spacing[ax]))
            b = int(np.floor((points[p, ax] + h[ax] - lo[ax]) / spacing[ax]))
            if a < 0:
                a = 0
            if b > nn - 1:
                b = nn - 1
            if a > b:
                ok = False
                break
            i0[ax] = a
            i1[ax] = b
        if not ok:
            continue
        for i in range(i0[0], i1[0] + 1):
            z1 = (lo[0] + i * spacing[0] - points[p, 0]) / h[0]
            k1 = _kernel_value(z1, orders[0]) / h[0] ** (1 + orders[0])
            if k1 == 0.0:
                continue
            for j in range(i0[1], i1[1] + 1):
                z2 = (lo[1] + j * spacing[1] - points[p, 1]) / h[1]
                k2 = _kernel_value(z2, orders[1]) / h[1] ** (1 + orders[1])
                if k2 == 0.0:
                    continue
                for k in range(i0[2], i1[2] + 1):
                    z3 = (lo[2] + k * spacing[2] - points[p, 2]) / h[2]
                    k3 = _kernel_value(z3, orders[2]) / h[2] ** (1 + orders[2])
                    out[i, j, k] += cs * k1 * k2 * k3
    return out


@njit(cache=True, inline="always")
def _kernel_value(z, order):
    if z < -1.0 or z > 1.0:
        return 0.0
    z2 = z * z
    c = 35.0 / 32.0
    if order == 0:
        t = 1.0 - z2
        return c * t * t * t
    if order == 1:
        t = 1.0 - z2
        return c * (-6.0 * z) * t * t
    if order == 2:
        return c * (-6.0 + z2 * (36.0 - 30.0 * z2))
    return c * z * (72.0 - 120.0 * z2)


@njit(cache=True)
def phase_kde(gx, gv, w, probes_x, probes_v, hx, hv):
    """Product-kernel phase-space density estimate at probe states."""
    P = probes_x.shape[0]
    n = gx.shape[0]
    out = np.zeros(P)
    for i in range(P):
        acc = 0.0
        for j in range(n):
            val = w[j]
            for ax in range(3):
                z = (probes_x[i, ax] - gx[j, ax]) / hx
                if z < -1.0 or z > 1.0:
                    val = 0.0
                    break
                val *= _kernel_value(z, 0) / hx
            if val == 0.0:
                continue
            for ax in range(3):
                z = (probes_v[i, ax] - gv[j, ax]) / hv
                if z < -1.0 or z > 1.0:
                    val = 0.0
                    break
                val *= _kernel_value(z, 0) / hv
            acc += val
        out[i] = acc
    return out
