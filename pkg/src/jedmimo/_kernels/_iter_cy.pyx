# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled iteration kernels.

Same loops as ``_iter_np`` (identical update order and factorizations),
written against BLAS/LAPACK directly with preallocated Fortran-ordered
workspaces so each iteration runs without Python-level temporaries.
Hermitian products fill only the lower triangle (zherk) and the solves
read only that triangle (zposv).
"""

import numpy as np

from ..errors import NumericalFailure

from libc.math cimport sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm, zherk
from scipy.linalg.cython_lapack cimport zposv

BACKEND_NAME = "cython"

ctypedef double complex zcomplex


cdef inline double _clip(double v, double r) nogil:
    return r if v > r else (-r if v < -r else v)


cdef void _conj_transpose(int rows, int cols, zcomplex *src, zcomplex *dst) nogil:
    # dst (cols x rows, F-order) = src^H (src is rows x cols, F-order)
    cdef double *s = <double *> src
    cdef double *d = <double *> dst
    cdef Py_ssize_t i, j, so, do
    for j in range(cols):
        for i in range(rows):
            so = 2 * (j * rows + i)
            do = 2 * (i * cols + j)
            d[do] = s[so]
            d[do + 1] = -s[so + 1]


cdef int _channel_update(int n, int k, int t_d, double noise_ratio,
                         zcomplex *g_t, zcomplex *p_t, zcomplex *y_d,
                         zcomplex *x, zcomplex *a, zcomplex *b,
                         zcomplex *bh, zcomplex *h) nogil:
    # h = (p_t + y_d x^H)(g_t + x x^H + noise_ratio I)^-1 via Cholesky.
    cdef int info = 0
    cdef int i
    cdef double one_r = 1.0
    cdef zcomplex zone = 1.0
    cdef double *ad = <double *> a
    memcpy(a, g_t, <size_t> k * k * sizeof(zcomplex))
    zherk("L", "N", &k, &t_d, &one_r, x, &k, &one_r, a, &k)
    for i in range(k):
        ad[2 * (<Py_ssize_t> i * k + i)] += noise_ratio
    memcpy(b, p_t, <size_t> n * k * sizeof(zcomplex))
    zgemm("N", "C", &n, &k, &t_d, &zone, y_d, &n, x, &k, &zone, b, &n)
    _conj_transpose(n, k, b, bh)
    zposv("L", &k, &n, a, &k, bh, &k, &info)
    if info != 0:
        return info
    _conj_transpose(k, n, bh, h)
    return 0


cdef void _pilot_grams(int n, int k, int t_t, zcomplex *x_t, zcomplex *y_t,
                       zcomplex *g_t, zcomplex *p_t) nogil:
    cdef double one_r = 1.0, zero_r = 0.0
    cdef zcomplex zone = 1.0, zzero = 0.0
    zherk("L", "N", &k, &t_t, &one_r, x_t, &k, &zero_r, g_t, &k)
    zgemm("N", "C", &n, &k, &t_t, &zone, y_t, &n, x_t, &k, &zzero, p_t, &n)


def admm_iterations(y_t, y_d, x_t, h0, double rho, double noise_ratio,
                    int iterations, double box_radius):
    """Scaled-dual ADMM sweeps; see the numpy backend for the contract."""
    cdef zcomplex[::1, :] ytv = np.asfortranarray(y_t, dtype=np.complex128)
    cdef zcomplex[::1, :] ydv = np.asfortranarray(y_d, dtype=np.complex128)
    cdef zcomplex[::1, :] xtv = np.asfortranarray(x_t, dtype=np.complex128)
    cdef int n = ytv.shape[0]
    cdef int k = xtv.shape[0]
    cdef int t_t = xtv.shape[1]
    cdef int t_d = ydv.shape[1]

    h_arr = np.array(h0, dtype=np.complex128, order="F", copy=True)
    x_arr = np.zeros((k, t_d), dtype=np.complex128, order="F")
    z_arr = np.zeros((k, t_d), dtype=np.complex128, order="F")
    lam_arr = np.zeros((k, t_d), dtype=np.complex128, order="F")
    primal_arr = np.empty(iterations)
    dual_arr = np.empty(iterations)
    lamn_arr = np.empty(iterations)

    cdef zcomplex[::1, :] hv = h_arr
    cdef zcomplex[::1, :] xv = x_arr
    cdef zcomplex[::1, :] zv = z_arr
    cdef zcomplex[::1, :] lamv = lam_arr
    cdef double[::1] primal = primal_arr
    cdef double[::1] dual = dual_arr
    cdef double[::1] lamn = lamn_arr

    cdef zcomplex[::1, :] gt = np.empty((k, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] pt = np.empty((n, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] a = np.empty((k, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] b = np.empty((n, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] bh = np.empty((k, n), dtype=np.complex128, order="F")

    cdef double half_rho = 0.5 * rho
    cdef double one_r = 1.0, zero_r = 0.0
    cdef zcomplex zone = 1.0, zzero = 0.0
    cdef int info = 0, it
    cdef Py_ssize_t i, m = <Py_ssize_t> k * t_d
    cdef double *xd = <double *> &xv[0, 0]
    cdef double *zd = <double *> &zv[0, 0]
    cdef double *ld = <double *> &lamv[0, 0]
    cdef double *ad
    cdef double sp, sd, sl, re, im, tre, tim, zr, zi, rr, ri, dzr, dzi

    _pilot_grams(n, k, t_t, &xtv[0, 0], &ytv[0, 0], &gt[0, 0], &pt[0, 0])

    for it in range(1, iterations + 1):
        # symbol update: x = (h^H h + rho/2 I)^-1 (h^H y_d + rho/2 (z - lam))
        zherk("L", "C", &k, &n, &one_r, &hv[0, 0], &n, &zero_r, &a[0, 0], &k)
        ad = <double *> &a[0, 0]
        for i in range(k):
            ad[2 * (i * k + i)] += half_rho
        zgemm("C", "N", &k, &t_d, &n, &zone, &hv[0, 0], &n, &ydv[0, 0], &n,
              &zzero, &xv[0, 0], &k)
        for i in range(2 * m):
            xd[i] += half_rho * (zd[i] - ld[i])
        zposv("L", &k, &t_d, &a[0, 0], &k, &xv[0, 0], &k, &info)
        if info != 0:
            raise NumericalFailure(
                "symbol-update Gram matrix lost positive definiteness", it)

        # fused projection, dual ascent and residual accumulation
        sp = 0.0
        sd = 0.0
        sl = 0.0
        for i in range(m):
            re = xd[2 * i]
            im = xd[2 * i + 1]
            tre = re + ld[2 * i]
            tim = im + ld[2 * i + 1]
            zr = _clip(tre, box_radius)
            zi = _clip(tim, box_radius)
            rr = re - zr
            ri = im - zi
            ld[2 * i] += rr
            ld[2 * i + 1] += ri
            sp += rr * rr + ri * ri
            dzr = zr - zd[2 * i]
            dzi = zi - zd[2 * i + 1]
            sd += dzr * dzr + dzi * dzi
            zd[2 * i] = zr
            zd[2 * i + 1] = zi
            sl += ld[2 * i] * ld[2 * i] + ld[2 * i + 1] * ld[2 * i + 1]
        primal[it - 1] = sqrt(sp)
        dual[it - 1] = sqrt(sd)
        lamn[it - 1] = sqrt(sl)

        info = _channel_update(n, k, t_d, noise_ratio, &gt[0, 0], &pt[0, 0],
                               &ydv[0, 0], &xv[0, 0], &a[0, 0], &b[0, 0],
                               &bh[0, 0], &hv[0, 0])
        if info != 0:
            raise NumericalFailure(
                "channel-update Gram matrix lost positive definiteness", it)

    return x_arr, h_arr, primal_arr, dual_arr, lamn_arr


def am_iterations(y_t, y_d, x_t, h0, double noise_ratio, int iterations,
                  double box_radius, double ridge_scale=1e-12):
    """Alternating-minimization sweeps; see the numpy backend for the contract."""
    cdef zcomplex[::1, :] ytv = np.asfortranarray(y_t, dtype=np.complex128)
    cdef zcomplex[::1, :] ydv = np.asfortranarray(y_d, dtype=np.complex128)
    cdef zcomplex[::1, :] xtv = np.asfortranarray(x_t, dtype=np.complex128)
    cdef int n = ytv.shape[0]
    cdef int k = xtv.shape[0]
    cdef int t_t = xtv.shape[1]
    cdef int t_d = ydv.shape[1]
    cdef int msize = k if n >= k else n

    h_arr = np.array(h0, dtype=np.complex128, order="F", copy=True)
    x_arr = np.zeros((k, t_d), dtype=np.complex128, order="F")

    cdef zcomplex[::1, :] hv = h_arr
    cdef zcomplex[::1, :] xv = x_arr
    cdef zcomplex[::1, :] gt = np.empty((k, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] pt = np.empty((n, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] g = np.empty((msize, msize), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] a = np.empty((k, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] b = np.empty((n, k), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] bh = np.empty((k, n), dtype=np.complex128, order="F")
    cdef zcomplex[::1, :] w = np.empty((n, t_d if n < k else 1), dtype=np.complex128, order="F")

    cdef double one_r = 1.0, zero_r = 0.0
    cdef zcomplex zone = 1.0, zzero = 0.0
    cdef int info = 0, it
    cdef Py_ssize_t i, m = <Py_ssize_t> k * t_d
    cdef double *xd = <double *> &xv[0, 0]
    cdef double *gd = <double *> &g[0, 0]
    cdef double *ad2
    cdef double trace, ridge

    _pilot_grams(n, k, t_t, &xtv[0, 0], &ytv[0, 0], &gt[0, 0], &pt[0, 0])

    for it in range(1, iterations + 1):
        if n >= k:
            # x = (h^H h)^-1 h^H y_d, ridge retry if the Gram loses rank
            zherk("L", "C", &k, &n, &one_r, &hv[0, 0], &n, &zero_r, &g[0, 0], &k)
            trace = 0.0
            for i in range(k):
                trace += gd[2 * (i * k + i)]
            memcpy(&a[0, 0], &g[0, 0], <size_t> k * k * sizeof(zcomplex))
            zgemm("C", "N", &k, &t_d, &n, &zone, &hv[0, 0], &n, &ydv[0, 0], &n,
                  &zzero, &xv[0, 0], &k)
            zposv("L", &k, &t_d, &a[0, 0], &k, &xv[0, 0], &k, &info)
            if info != 0:
                ridge = ridge_scale * (trace if trace > 0.0 else 0.0)
                memcpy(&a[0, 0], &g[0, 0], <size_t> k * k * sizeof(zcomplex))
                ad2 = <double *> &a[0, 0]
                for i in range(k):
                    ad2[2 * (i * k + i)] += ridge
                zgemm("C", "N", &k, &t_d, &n, &zone, &hv[0, 0], &n,
                      &ydv[0, 0], &n, &zzero, &xv[0, 0], &k)
                zposv("L", &k, &t_d, &a[0, 0], &k, &xv[0, 0], &k, &info)
                if info != 0:
                    raise NumericalFailure(
                        "rank-deficient symbol-update Gram matrix", it)
        else:
            # underdetermined: x = h^H (h h^H + ridge I)^-1 y_d
            zherk("L", "N", &n, &k, &one_r, &hv[0, 0], &n, &zero_r, &g[0, 0], &n)
            trace = 0.0
            for i in range(n):
                trace += gd[2 * (i * n + i)]
            ridge = ridge_scale * (trace if trace > 0.0 else 0.0)
            for i in range(n):
                gd[2 * (i * n + i)] += ridge
            memcpy(&w[0, 0], &ydv[0, 0], <size_t> n * t_d * sizeof(zcomplex))
            zposv("L", &n, &t_d, &g[0, 0], &n, &w[0, 0], &n, &info)
            if info != 0:
                raise NumericalFailure("symbol-update Gram matrix", it)
            zgemm("C", "N", &k, &t_d, &n, &zone, &hv[0, 0], &n, &w[0, 0], &n,
                  &zzero, &xv[0, 0], &k)

        for i in range(2 * m):
            xd[i] = _clip(xd[i], box_radius)

        info = _channel_update(n, k, t_d, noise_ratio, &gt[0, 0], &pt[0, 0],
                               &ydv[0, 0], &xv[0, 0], &a[0, 0], &b[0, 0],
                               &bh[0, 0], &hv[0, 0])
        if info != 0:
            raise NumericalFailure(
                "channel-update Gram matrix lost positive definiteness", it)

    return x_arr, h_arr
