"""Compiled inner loops for the likelihood hot path."""

import numba
import numpy as np


@numba.njit(cache=True)
def _bin_of(r, edges):
    n = edges.size - 1
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if edges[mid] <= r:
            lo = mid
        else:
            hi = mid - 1
    return lo


@numba.njit(cache=True)
def phi_at(r, edges, rho, mass_edges, outer, G, m_total):
    if r > edges[-1]:
        return G * m_total / r
    i = _bin_of(r, edges)
    m = mass_edges[i] + 4.0 * np.pi * rho[i] * (r**3 - edges[i] ** 3) / 3.0
    inner = G * m / r if r > 0.0 else 0.0
    return inner + 2.0 * np.pi * G * rho[i] * (edges[i + 1] ** 2 - r * r) + outer[i]


@numba.njit(cache=True)
def radius_in_profile(t, edges, rho, mass_edges, outer, G, m_total, phi_edges, tol_r):
    """Smallest r with phi(r) <= t; assumes phi(r_max) <= t."""
    if phi_edges[0] <= t:
        return 0.0
    k = 1
    while k < phi_edges.size - 1 and phi_edges[k] > t:
        k += 1
    # phi is strictly decreasing inside this bin: a/r + b - c r^2
    lo = edges[k - 1]
    hi = edges[k]
    i = k - 1
    a = G * (mass_edges[i] - 4.0 * np.pi * rho[i] * edges[i] ** 3 / 3.0)
    c = 2.0 * np.pi * G * rho[i] / 3.0
    tol_phi = 1e-15 * phi_edges[0]
    r = 0.5 * (lo + hi)
    for _ in range(200):
        val = phi_at(r, edges, rho, mass_edges, outer, G, m_total) - t
        if abs(val) <= tol_phi:
            return r
        if val > 0.0:
            lo = r
        else:
            hi = r
        if hi - lo <= tol_r:
            return hi
        d = (-a / (r * r) if r > 0.0 else 0.0) - 2.0 * c * r
        r_new = r - val / d if d < 0.0 else 0.5 * (lo + hi)
        if not (lo < r_new < hi):
            r_new = 0.5 * (lo + hi)
        r = r_new
    return r


@numba.njit(cache=True)
def projection_matrix(edges, rho, mass_edges, outer, G, m_total, phi_edges,
                      e_edges, rp, v3, gl_x, gl_w, tol_r):
    n = rp.size
    ne = e_edges.size - 1
    nr_inner = edges.size - 2
    r_max = edges[-1]
    A = np.zeros((n, ne))
    npts = ne + 1 + nr_inner + 2
    pts = np.empty(npts)
    cum = np.empty(npts)
    X = np.empty(ne + 1)
    I = np.empty(ne + 1)
    for k in range(n):
        if rp[k] >= r_max:
            continue
        L = np.sqrt(r_max * r_max - rp[k] * rp[k])
        kin = 0.5 * v3[k] * v3[k]
        e_near = kin - phi_at(rp[k], edges, rho, mass_edges, outer, G, m_total)
        e_far = kin - phi_edges[-1]
        for j in range(ne + 1):
            ej = e_edges[j]
            if ej <= e_near:
                X[j] = 0.0
            elif ej >= e_far:
                X[j] = L
            else:
                rt = radius_in_profile(kin - ej, edges, rho, mass_edges, outer, G,
                                       m_total, phi_edges, tol_r)
                X[j] = min(np.sqrt(max(rt * rt - rp[k] * rp[k], 0.0)), L)
        pts[0] = 0.0
        for j in range(ne + 1):
            pts[1 + j] = X[j]
        for i in range(nr_inner):
            re = edges[i + 1]
            pts[ne + 2 + i] = min(np.sqrt(max(re * re - rp[k] * rp[k], 0.0)), L)
        pts[npts - 1] = L
        order = np.argsort(pts, kind="mergesort")
        acc = 0.0
        prev = 0.0
        rp2 = rp[k] * rp[k]
        for s in range(npts):
            cur = pts[order[s]]
            h = cur - prev
            if h > 0.0:
                tot = 0.0
                for q in range(gl_x.size):
                    x3 = prev + h * gl_x[q]
                    tot += gl_w[q] * phi_at(np.sqrt(rp2 + x3 * x3), edges, rho,
                                            mass_edges, outer, G, m_total)
                acc += h * tot
            cum[order[s]] = acc
            prev = cur
        for j in range(ne + 1):
            I[j] = cum[1 + j]
        for j in range(ne):
            dX = X[j + 1] - X[j]
            partial = (e_edges[j + 1] - kin) * dX + (I[j + 1] - I[j])
            if partial < 0.0:
                partial = 0.0
            A[k, j] = 4.0 * np.pi * ((e_edges[j + 1] - e_edges[j]) * X[j] + partial)
    return A


@numba.njit(cache=True)
def radii_of_potential(targets, edges, rho, mass_edges, outer, G, m_total, phi_edges, tol_r):
    out = np.empty(targets.size)
    for k in range(targets.size):
        out[k] = radius_in_profile(targets[k], edges, rho, mass_edges, outer, G,
                                   m_total, phi_edges, tol_r)
    return out
