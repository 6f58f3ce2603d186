# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Grid-accelerated neighborhood statistics (compiled hot kernel).

Points are bucketed into a uniform voxel grid with cells no smaller than the
query radius (capped at ~m^(1/3) cells per axis), so each center only scans
the 3x3x3 cell window around it. Statistics use a two-pass variance that
recomputes distances instead of storing them, keeping the working set at a
few bytes per point. The per-center loop parallelizes with OpenMP; each
thread writes only its own output rows, so results are deterministic.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs, floor, sqrt

cnp.import_array()


cdef inline Py_ssize_t _cell_of(double coord, double origin, double cell,
                                Py_ssize_t dim) noexcept nogil:
    cdef double f = floor((coord - origin) / cell)
    if f < 0:
        return 0
    if f >= <double> dim:
        return dim - 1
    return <Py_ssize_t> f


cdef void _one_center(double cx, double cy, double cz,
                      const double* cvals, Py_ssize_t n_channels,
                      const double* pts, const double* pvals,
                      const cnp.int64_t* starts,
                      Py_ssize_t d0, Py_ssize_t d1, Py_ssize_t d2,
                      double ox, double oy, double oz,
                      double ex, double ey, double ez,
                      double radius, double r2,
                      double* out_row) noexcept nogil:
    cdef Py_ssize_t x0 = _cell_of(cx - radius, ox, ex, d0)
    cdef Py_ssize_t x1 = _cell_of(cx + radius, ox, ex, d0)
    cdef Py_ssize_t y0 = _cell_of(cy - radius, oy, ey, d1)
    cdef Py_ssize_t y1 = _cell_of(cy + radius, oy, ey, d1)
    cdef Py_ssize_t z0 = _cell_of(cz - radius, oz, ez, d2)
    cdef Py_ssize_t z1 = _cell_of(cz + radius, oz, ez, d2)
    cdef Py_ssize_t gx, gy, gz, base, j, ch
    cdef cnp.int64_t count = 0
    cdef double sum_d = 0.0, var_acc = 0.0
    cdef double dx, dy, dz, dsq, mean, dev

    for gx in range(x0, x1 + 1):
        for gy in range(y0, y1 + 1):
            for gz in range(z0, z1 + 1):
                base = (gx * d1 + gy) * d2 + gz
                for j in range(starts[base], starts[base + 1]):
                    dx = pts[3 * j] - cx
                    dy = pts[3 * j + 1] - cy
                    dz = pts[3 * j + 2] - cz
                    dsq = dx * dx + dy * dy + dz * dz
                    if dsq <= r2:
                        count += 1
                        sum_d += sqrt(dsq)
                        for ch in range(n_channels):
                            out_row[3 + ch] += fabs(pvals[n_channels * j + ch] - cvals[ch])

    if count == 0:
        return
    mean = sum_d / count

    for gx in range(x0, x1 + 1):
        for gy in range(y0, y1 + 1):
            for gz in range(z0, z1 + 1):
                base = (gx * d1 + gy) * d2 + gz
                for j in range(starts[base], starts[base + 1]):
                    dx = pts[3 * j] - cx
                    dy = pts[3 * j + 1] - cy
                    dz = pts[3 * j + 2] - cz
                    dsq = dx * dx + dy * dy + dz * dz
                    if dsq <= r2:
                        dev = sqrt(dsq) - mean
                        var_acc += dev * dev

    out_row[0] = <double> count
    out_row[1] = mean
    out_row[2] = var_acc / count
    for ch in range(n_channels):
        out_row[3 + ch] /= count


def local_stats(centers, center_vals, points, point_vals, double radius):
    """Neighborhood statistics of `points` around each center.

    For center i with value row c_i, over the neighbors j of the closed ball
    ||p_j - x_i|| <= radius:

        out[i, 0] = neighbor count
        out[i, 1] = mean distance
        out[i, 2] = population variance of the distances
        out[i, 3 + ch] = mean of |point_vals[j, ch] - center_vals[i, ch]|

    Rows with no neighbors are all zero. Same contract as the fallback.
    """
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    center_vals = np.ascontiguousarray(center_vals, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    point_vals = np.ascontiguousarray(point_vals, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != 3:
        raise ValueError(f"centers must have shape (n, 3), got {centers.shape}")
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"points must have shape (m, 3), got {points.shape}")
    if center_vals.ndim != 2 or center_vals.shape[0] != centers.shape[0]:
        raise ValueError("center_vals must be (n, n_channels)")
    if point_vals.ndim != 2 or point_vals.shape[0] != points.shape[0] \
            or point_vals.shape[1] != center_vals.shape[1]:
        raise ValueError("point_vals must be (m, n_channels) with matching channels")
    if not np.isfinite(radius) or radius < 0:
        raise ValueError(f"radius must be finite and >= 0, got {radius}")

    cdef Py_ssize_t n = centers.shape[0]
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t n_channels = center_vals.shape[1]
    out = np.zeros((n, 3 + n_channels), dtype=np.float64)
    if n == 0 or m == 0:
        return out
    if n_channels == 0:
        # keep the pointer arithmetic valid; the channel loops never run
        center_vals = np.zeros((n, 1), dtype=np.float64)
        point_vals = np.zeros((m, 1), dtype=np.float64)

    pmin = points.min(axis=0)
    extent = points.max(axis=0) - pmin
    cap = max(1, int(round(m ** (1.0 / 3.0))))
    if radius > 0:
        dims = np.floor(extent / radius).astype(np.int64)
    else:
        dims = np.zeros(3, dtype=np.int64)
    dims = np.clip(dims, 1, cap)
    cell = np.where(extent > 0, extent / dims, 1.0)

    cell_idx = np.clip((np.floor((points - pmin) / cell)).astype(np.int64), 0, dims - 1)
    cell_id = (cell_idx[:, 0] * dims[1] + cell_idx[:, 1]) * dims[2] + cell_idx[:, 2]
    order = np.argsort(cell_id, kind="stable")
    ncells = int(dims.prod())
    starts_arr = np.zeros(ncells + 1, dtype=np.int64)
    np.cumsum(np.bincount(cell_id, minlength=ncells), out=starts_arr[1:])
    pts_sorted = np.ascontiguousarray(points[order])
    pvals_sorted = np.ascontiguousarray(point_vals[order])

    cdef const double[:, ::1] c_view = centers
    cdef const double[:, ::1] cv_view = center_vals
    cdef const double[:, ::1] p_view = pts_sorted
    cdef const double[:, ::1] pv_view = pvals_sorted
    cdef const cnp.int64_t[::1] s_view = starts_arr
    cdef double[:, ::1] out_view = out
    cdef double r2 = radius * radius
    cdef Py_ssize_t dd0 = dims[0], dd1 = dims[1], dd2 = dims[2]
    cdef double o0 = pmin[0], o1 = pmin[1], o2 = pmin[2]
    cdef double e0 = cell[0], e1 = cell[1], e2 = cell[2]
    cdef Py_ssize_t i

    for i in prange(n, nogil=True, schedule="static"):
        _one_center(c_view[i, 0], c_view[i, 1], c_view[i, 2],
                    &cv_view[i, 0], n_channels,
                    &p_view[0, 0], &pv_view[0, 0],
                    &s_view[0], dd0, dd1, dd2,
                    o0, o1, o2, e0, e1, e2,
                    radius, r2, &out_view[i, 0])
    return out
