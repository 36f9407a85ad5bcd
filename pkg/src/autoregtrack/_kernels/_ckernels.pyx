# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, erf, floor, INFINITY

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


def masked_softmax(double[:, ::1] logits, mask_arr):
    cdef const unsigned char[:, ::1] mask = np.ascontiguousarray(mask_arr).view(np.uint8)
    cdef Py_ssize_t n = logits.shape[0], m = logits.shape[1], i, j
    cdef double mx, s
    out = np.zeros((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        mx = -INFINITY
        for j in range(m):
            if mask[i, j] and logits[i, j] > mx:
                mx = logits[i, j]
        s = 0.0
        for j in range(m):
            if mask[i, j]:
                o[i, j] = exp(logits[i, j] - mx)
                s += o[i, j]
        for j in range(m):
            o[i, j] /= s
    return out


def masked_softmax_backward(double[:, ::1] probs, double[:, ::1] grad):
    cdef Py_ssize_t n = probs.shape[0], m = probs.shape[1], i, j
    cdef double s
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += probs[i, j] * grad[i, j]
        for j in range(m):
            o[i, j] = probs[i, j] * (grad[i, j] - s)
    return out


def layer_norm(double[:, ::1] x, double[::1] gamma, double[::1] beta, double eps):
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    cdef double mu, var, r, d
    y = np.empty((n, m))
    xhat = np.empty((n, m))
    rstd = np.empty((n, 1))
    cdef double[:, ::1] yv = y, hv = xhat, rv = rstd
    for i in range(n):
        mu = 0.0
        for j in range(m):
            mu += x[i, j]
        mu /= m
        var = 0.0
        for j in range(m):
            d = x[i, j] - mu
            var += d * d
        var /= m
        r = 1.0 / sqrt(var + eps)
        rv[i, 0] = r
        for j in range(m):
            hv[i, j] = (x[i, j] - mu) * r
            yv[i, j] = hv[i, j] * gamma[j] + beta[j]
    return y, xhat, rstd


def layer_norm_backward(double[:, ::1] dy, double[:, ::1] xhat, double[:, ::1] rstd,
                        double[::1] gamma):
    cdef Py_ssize_t n = dy.shape[0], m = dy.shape[1], i, j
    cdef double sg, sgx, g
    dx = np.empty((n, m))
    dgamma = np.zeros(m)
    dbeta = np.zeros(m)
    cdef double[:, ::1] dxv = dx
    cdef double[::1] dgv = dgamma, dbv = dbeta
    for i in range(n):
        sg = 0.0
        sgx = 0.0
        for j in range(m):
            g = dy[i, j] * gamma[j]
            sg += g
            sgx += g * xhat[i, j]
            dgv[j] += dy[i, j] * xhat[i, j]
            dbv[j] += dy[i, j]
        for j in range(m):
            g = dy[i, j] * gamma[j]
            dxv[i, j] = (rstd[i, 0] / m) * (m * g - sg - xhat[i, j] * sgx)
    return dx, dgamma, dbeta


def gelu(x):
    cdef double[::1] xv = np.ascontiguousarray(x).reshape(-1)
    out = np.empty(xv.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        o[i] = 0.5 * xv[i] * (1.0 + erf(xv[i] * INV_SQRT2))
    return out.reshape(np.shape(x))


def gelu_backward(x, dy):
    cdef double[::1] xv = np.ascontiguousarray(x).reshape(-1)
    cdef double[::1] gv = np.ascontiguousarray(dy).reshape(-1)
    out = np.empty(xv.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double t
    for i in range(xv.shape[0]):
        t = xv[i]
        o[i] = gv[i] * (0.5 * (1.0 + erf(t * INV_SQRT2)) + t * INV_SQRT2PI * exp(-0.5 * t * t))
    return out.reshape(np.shape(x))


def bilinear_sample(double[:, :, ::1] grid, double[:, ::1] points):
    cdef Py_ssize_t gh = grid.shape[0], gw = grid.shape[1], c = grid.shape[2]
    cdef Py_ssize_t n = points.shape[0], i, k, u0, v0, u1, v1
    cdef double u, v, fu, fv
    out = np.empty((n, c))
    cdef double[:, ::1] o = out
    for i in range(n):
        u = min(max(points[i, 0], 0.0), gw - 1.0)
        v = min(max(points[i, 1], 0.0), gh - 1.0)
        u0 = min(<Py_ssize_t>floor(u), gw - 1)
        v0 = min(<Py_ssize_t>floor(v), gh - 1)
        u1 = min(u0 + 1, gw - 1)
        v1 = min(v0 + 1, gh - 1)
        fu = u - u0
        fv = v - v0
        for k in range(c):
            o[i, k] = ((grid[v0, u0, k] * (1.0 - fu) + grid[v0, u1, k] * fu) * (1.0 - fv)
                       + (grid[v1, u0, k] * (1.0 - fu) + grid[v1, u1, k] * fu) * fv)
    return out


cdef inline double _tap(double[:, :, ::1] img, Py_ssize_t y, Py_ssize_t x, Py_ssize_t k,
                        double[::1] pad) nogil:
    if y < 0 or x < 0 or y >= img.shape[0] or x >= img.shape[1]:
        return pad[k]
    return img[y, x, k]


def crop_resize(double[:, :, ::1] image, double cx, double cy, double side,
                Py_ssize_t out_side, double[::1] pad):
    cdef Py_ssize_t c = image.shape[2], i, j, k, x0, y0
    cdef double step = side / out_side, xs, ys, fx, fy
    out = np.empty((out_side, out_side, c))
    cdef double[:, :, ::1] o = out
    for i in range(out_side):
        ys = cy - 0.5 * side + (i + 0.5) * step - 0.5
        y0 = <Py_ssize_t>floor(ys)
        fy = ys - y0
        for j in range(out_side):
            xs = cx - 0.5 * side + (j + 0.5) * step - 0.5
            x0 = <Py_ssize_t>floor(xs)
            fx = xs - x0
            for k in range(c):
                o[i, j, k] = ((_tap(image, y0, x0, k, pad) * (1.0 - fx)
                               + _tap(image, y0, x0 + 1, k, pad) * fx) * (1.0 - fy)
                              + (_tap(image, y0 + 1, x0, k, pad) * (1.0 - fx)
                                 + _tap(image, y0 + 1, x0 + 1, k, pad) * fx) * fy)
    return out
