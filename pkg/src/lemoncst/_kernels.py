"""Compiled inner loops over lemon quadrature nodes.

Every routine walks the same node set for a lemon ``(p, R, theta0, z0)``:

* fixed rule (``qmode == 0``): midpoint nodes on a uniform ``n_z x n_phi``
  grid over ``z in (-a, a)``, ``phi in [-pi, pi)`` with weight
  ``t p / sqrt(p^2 - z^2) dz dphi``;
* adaptive rule (``qmode == 1``): midpoint nodes uniform in arc angle
  ``psi`` (``z = p sin psi``) and in ``phi``, spaced about ``ds`` on the
  surface and clipped to the slab ``zlo <= z <= zhi`` and the disc
  ``r <= rho``; weight ``t p dpsi dphi``.

What happens at a node is selected by ``action``: accumulate a matrix row
(0), gather trilinear samples (1), scatter trilinear weights (2) or mark
normal directions on a voxel/direction occupancy table (3).
"""
import math

import numpy as np
from numba import njit

ROW, GATHER, SCATTER, VISIBILITY = 0, 1, 2, 3


@njit(cache=True)
def direction_bin(x, y, z, n_side):
    """Equal-area bin of a unit vector; ``2 * n_side**2`` bins.

    Each hemisphere maps area-preservingly onto the diamond
    ``|u| + |v| <= 1``, which a 45 degree turn makes a square split into
    ``n_side x n_side`` cells.
    """
    az = abs(z)
    r = math.sqrt(max(0.0, 1.0 - az))
    phi = math.atan2(abs(y), abs(x))
    v = r * phi / (0.5 * math.pi)
    u = r - v
    if x < 0.0:
        u = -u
    if y < 0.0:
        v = -v
    # rotate the unit diamond onto the square [-1, 1]^2
    a = u + v
    b = u - v
    ia = int((a + 1.0) * 0.5 * n_side)
    ib = int((b + 1.0) * 0.5 * n_side)
    if ia >= n_side:
        ia = n_side - 1
    if ib >= n_side:
        ib = n_side - 1
    if ia < 0:
        ia = 0
    if ib < 0:
        ib = 0
    hemi = 1 if z < 0.0 else 0
    return (hemi * n_side + ia) * n_side + ib


@njit(cache=True)
def _node(x, y, z, w, nrm_x, nrm_y, nrm_z, action, o, s, n, vol, val, acc, mark, touched, cnt,
          occ, n_side):
    ny_nz = n[1] * n[2]
    if action == VISIBILITY:
        # visibility concerns points of the open unit cylinder only
        if x * x + y * y >= 1.0:
            return 0.0
        i = int(math.floor((x - o[0]) / s[0] + 0.5))
        j = int(math.floor((y - o[1]) / s[1] + 0.5))
        k = int(math.floor((z - o[2]) / s[2] + 0.5))
        if i < 0 or j < 0 or k < 0 or i >= n[0] or j >= n[1] or k >= n[2]:
            return 0.0
        idx = i * ny_nz + j * n[2] + k
        occ[idx, direction_bin(nrm_x, nrm_y, nrm_z, n_side)] = True
        occ[idx, direction_bin(-nrm_x, -nrm_y, -nrm_z, n_side)] = True
        return 0.0
    qx = (x - o[0]) / s[0]
    qy = (y - o[1]) / s[1]
    qz = (z - o[2]) / s[2]
    i0 = int(math.floor(qx))
    j0 = int(math.floor(qy))
    k0 = int(math.floor(qz))
    if i0 < -1 or j0 < -1 or k0 < -1 or i0 >= n[0] or j0 >= n[1] or k0 >= n[2]:
        return 0.0
    fx = qx - i0
    fy = qy - j0
    fz = qz - k0
    total = 0.0
    for di in range(2):
        ii = i0 + di
        if ii < 0 or ii >= n[0]:
            continue
        cx = fx if di == 1 else 1.0 - fx
        for dj in range(2):
            jj = j0 + dj
            if jj < 0 or jj >= n[1]:
                continue
            cy = fy if dj == 1 else 1.0 - fy
            for dk in range(2):
                kk = k0 + dk
                if kk < 0 or kk >= n[2]:
                    continue
                c = cx * cy * (fz if dk == 1 else 1.0 - fz)
                if c == 0.0:
                    continue
                idx = ii * ny_nz + jj * n[2] + kk
                if action == GATHER:
                    total += w * c * vol[idx]
                elif action == SCATTER:
                    vol[idx] += val * w * c
                else:
                    if mark[idx] == 0:
                        mark[idx] = 1
                        touched[cnt[0]] = idx
                        cnt[0] += 1
                    acc[idx] += w * c
    return total


@njit(cache=True)
def visit_lemon(p, R, theta0, z0, qmode, n_phi, n_z, ds, zlo, zhi, rho, action, o, s, n, vol,
                val, acc, mark, touched, cnt, occ, n_side):
    cth = math.cos(theta0)
    sth = math.sin(theta0)
    a = math.sqrt(p * p - R * R)
    total = 0.0
    if qmode == 0:
        dz = 2.0 * a / n_z
        dphi = 2.0 * math.pi / n_phi
        for kz in range(n_z):
            zz = -a + (kz + 0.5) * dz
            rr = math.sqrt(p * p - zz * zz)
            t = rr - R
            w = t * p / rr * dz * dphi
            cpsi = rr / p
            spsi = zz / p
            for kp in range(n_phi):
                phi = -math.pi + (kp + 0.5) * dphi
                ex = -math.cos(theta0 - phi)
                ey = -math.sin(theta0 - phi)
                total += _node(cth + t * ex, sth + t * ey, z0 + zz, w, cpsi * ex, cpsi * ey,
                               spsi, action, o, s, n, vol, val, acc, mark, touched, cnt, occ,
                               n_side)
        return total
    zl = max(zlo - z0, -a)
    zh = min(zhi - z0, a)
    if zl >= zh:
        return 0.0
    psi_lo = math.asin(zl / p)
    psi_hi = math.asin(zh / p)
    n_psi = max(1, int(math.ceil(p * (psi_hi - psi_lo) / ds)))
    dpsi = (psi_hi - psi_lo) / n_psi
    for kz in range(n_psi):
        psi = psi_lo + (kz + 0.5) * dpsi
        cpsi = math.cos(psi)
        spsi = math.sin(psi)
        t = p * cpsi - R
        if t <= 0.0:
            continue
        zz = p * spsi
        cmin = (t * t + 1.0 - rho * rho) / (2.0 * t)
        if cmin >= 1.0:
            continue
        phimax = math.pi if cmin <= -1.0 else math.acos(cmin)
        nph = max(1, int(math.ceil(2.0 * phimax * t / ds)))
        dphi = 2.0 * phimax / nph
        w = t * p * dpsi * dphi
        for kp in range(nph):
            phi = -phimax + (kp + 0.5) * dphi
            ex = -math.cos(theta0 - phi)
            ey = -math.sin(theta0 - phi)
            total += _node(cth + t * ex, sth + t * ey, z0 + zz, w, cpsi * ex, cpsi * ey, spsi,
                           action, o, s, n, vol, val, acc, mark, touched, cnt, occ, n_side)
    return total


@njit(cache=True)
def assemble_rows(P, R, TH, Z0, valid, qmode, n_phi, n_z, ds, zlo, zhi, rho, o, s, n, cap):
    """CSR arrays (indptr, indices, data) for a block of lemons."""
    nrows = P.shape[0]
    nvox = n[0] * n[1] * n[2]
    acc = np.zeros(nvox)
    mark = np.zeros(nvox, np.uint8)
    touched = np.empty(nvox, np.int64)
    cnt = np.zeros(1, np.int64)
    indptr = np.zeros(nrows + 1, np.int64)
    indices = np.empty(max(cap, 16), np.int32)
    data = np.empty(max(cap, 16), np.float64)
    occ = np.zeros((1, 1), np.bool_)
    vol = np.zeros(1)
    nnz = 0
    for r in range(nrows):
        if valid[r]:
            cnt[0] = 0
            visit_lemon(P[r], R[r], TH[r], Z0[r], qmode, n_phi, n_z, ds, zlo, zhi, rho, ROW, o,
                        s, n, vol, 0.0, acc, mark, touched, cnt, occ, 1)
            nt = cnt[0]
            cols = np.sort(touched[:nt])
            if nnz + nt > indices.shape[0]:
                new_cap = max(2 * indices.shape[0], nnz + nt)
                ind2 = np.empty(new_cap, np.int32)
                dat2 = np.empty(new_cap, np.float64)
                ind2[:nnz] = indices[:nnz]
                dat2[:nnz] = data[:nnz]
                indices = ind2
                data = dat2
            for k in range(nt):
                idx = cols[k]
                v = acc[idx]
                acc[idx] = 0.0
                mark[idx] = 0
                if v != 0.0:
                    indices[nnz] = idx
                    data[nnz] = v
                    nnz += 1
        indptr[r + 1] = nnz
    return indptr, indices[:nnz].copy(), data[:nnz].copy()


@njit(cache=True)
def count_row_nnz(P, R, TH, Z0, valid, qmode, n_phi, n_z, ds, zlo, zhi, rho, o, s, n):
    nrows = P.shape[0]
    nvox = n[0] * n[1] * n[2]
    acc = np.zeros(nvox)
    mark = np.zeros(nvox, np.uint8)
    touched = np.empty(nvox, np.int64)
    cnt = np.zeros(1, np.int64)
    occ = np.zeros((1, 1), np.bool_)
    vol = np.zeros(1)
    out = np.zeros(nrows, np.int64)
    for r in range(nrows):
        if valid[r]:
            cnt[0] = 0
            visit_lemon(P[r], R[r], TH[r], Z0[r], qmode, n_phi, n_z, ds, zlo, zhi, rho, ROW, o,
                        s, n, vol, 0.0, acc, mark, touched, cnt, occ, 1)
            out[r] = cnt[0]
            for k in range(cnt[0]):
                acc[touched[k]] = 0.0
                mark[touched[k]] = 0
    return out


@njit(cache=True)
def apply_rows(P, R, TH, Z0, valid, qmode, n_phi, n_z, ds, zlo, zhi, rho, o, s, n, vol):
    out = np.zeros(P.shape[0])
    acc = np.zeros(1)
    mark = np.zeros(1, np.uint8)
    touched = np.zeros(1, np.int64)
    cnt = np.zeros(1, np.int64)
    occ = np.zeros((1, 1), np.bool_)
    for r in range(P.shape[0]):
        if valid[r]:
            out[r] = visit_lemon(P[r], R[r], TH[r], Z0[r], qmode, n_phi, n_z, ds, zlo, zhi, rho,
                                 GATHER, o, s, n, vol, 0.0, acc, mark, touched, cnt, occ, 1)
    return out


@njit(cache=True)
def adjoint_rows(P, R, TH, Z0, valid, qmode, n_phi, n_z, ds, zlo, zhi, rho, o, s, n, y, vol):
    """Accumulate ``A^T y`` into the flat ``vol`` (a caller-owned partial volume)."""
    acc = np.zeros(1)
    mark = np.zeros(1, np.uint8)
    touched = np.zeros(1, np.int64)
    cnt = np.zeros(1, np.int64)
    occ = np.zeros((1, 1), np.bool_)
    for r in range(P.shape[0]):
        if valid[r] and y[r] != 0.0:
            visit_lemon(P[r], R[r], TH[r], Z0[r], qmode, n_phi, n_z, ds, zlo, zhi, rho, SCATTER,
                        o, s, n, vol, y[r], acc, mark, touched, cnt, occ, 1)


@njit(cache=True)
def visibility_rows(P, R, TH, Z0, valid, qmode, n_phi, n_z, ds, zlo, zhi, rho, o, s, n, occ,
                    n_side):
    acc = np.zeros(1)
    mark = np.zeros(1, np.uint8)
    touched = np.zeros(1, np.int64)
    cnt = np.zeros(1, np.int64)
    vol = np.zeros(1)
    for r in range(P.shape[0]):
        if valid[r]:
            visit_lemon(P[r], R[r], TH[r], Z0[r], qmode, n_phi, n_z, ds, zlo, zhi, rho,
                        VISIBILITY, o, s, n, vol, 0.0, acc, mark, touched, cnt, occ, n_side)

