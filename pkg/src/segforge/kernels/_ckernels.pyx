# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel kernels.

Semantics must match kernels.fallback: integer outputs exactly, float
outputs to IEEE double evaluated in the same per-pixel order. The gamma
decode for 8-bit inputs goes through a 256-entry table holding exactly the
values the formula would produce.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cbrt, floor, pow
from libc.string cimport memcpy, memset

cnp.import_array()

cdef double DELTA = 6.0 / 29.0
cdef double EPS = (6.0 / 29.0) * (6.0 / 29.0) * (6.0 / 29.0)
cdef double F_SCALE = 1.0 / (3.0 * (6.0 / 29.0) * (6.0 / 29.0))
cdef double F_OFFSET = 4.0 / 29.0
cdef double WHITE_X = 0.95047
cdef double WHITE_Z = 1.08883

cdef unsigned long long _ALL_ONES = 0x0101010101010101ULL


cdef inline double _gamma_decode(double u) noexcept nogil:
    if u <= 0.04045:
        return u / 12.92
    return pow((u + 0.055) / 1.055, 2.4)


cdef inline double _gamma_encode(double lin) noexcept nogil:
    if lin <= 0.0031308:
        return 12.92 * lin
    return 1.055 * pow(lin, 1.0 / 2.4) - 0.055


cdef double GAMMA_DECODE_LUT[256]
cdef int _lut_i
for _lut_i in range(256):
    GAMMA_DECODE_LUT[_lut_i] = _gamma_decode(_lut_i / 255.0)


def resolve_owner(const cnp.uint8_t[:, :, ::1] masks):
    cdef Py_ssize_t n = masks.shape[0]
    cdef Py_ssize_t h = masks.shape[1]
    cdef Py_ssize_t w = masks.shape[2]
    owner_arr = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.int32_t[:, ::1] owner = owner_arr
    cdef Py_ssize_t i, y, x, k
    cdef const cnp.uint8_t* mrow
    cdef cnp.int32_t* orow
    cdef unsigned long long chunk
    with nogil:
        for i in range(n):
            for y in range(h):
                mrow = &masks[i, y, 0]
                orow = &owner[y, 0]
                x = 0
                while x + 8 <= w:
                    memcpy(&chunk, mrow + x, 8)
                    if chunk == 0:
                        x += 8
                    elif chunk == _ALL_ONES:
                        for k in range(8):
                            orow[x + k] = <cnp.int32_t>i
                        x += 8
                    else:
                        for k in range(8):
                            if mrow[x + k] != 0:
                                orow[x + k] = <cnp.int32_t>i
                        x += 8
                while x < w:
                    if mrow[x] != 0:
                        orow[x] = <cnp.int32_t>i
                    x += 1
    return owner_arr


def rle_encode(const cnp.uint8_t[:, ::1] mask):
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    buf_arr = np.empty(h * w + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] buf = buf_arr
    cdef Py_ssize_t k = 0, x, y
    cdef cnp.uint8_t cur = 0, v
    cdef cnp.int64_t run = 0
    with nogil:
        for x in range(w):
            for y in range(h):
                v = 1 if mask[y, x] != 0 else 0
                if v == cur:
                    run += 1
                else:
                    buf[k] = run
                    k += 1
                    cur = v
                    run = 1
        buf[k] = run
        k += 1
    return buf_arr[:k].copy()


def rle_decode(counts, Py_ssize_t height, Py_ssize_t width):
    counts_arr = np.ascontiguousarray(counts, dtype=np.int64)
    cdef cnp.int64_t total = counts_arr.sum()
    if total != height * width:
        raise ValueError(
            f"RLE counts sum {total} != {height}x{width}={height * width}"
        )
    # runs are contiguous in column-major pixel order, so fill a flat buffer
    # and hand back the (h, w) Fortran-order view of it
    flat_arr = np.zeros(height * width, dtype=np.uint8)
    cdef cnp.uint8_t[::1] flat = flat_arr
    cdef cnp.int64_t[::1] c = counts_arr
    cdef Py_ssize_t n = c.shape[0], i
    cdef cnp.int64_t p = 0
    cdef cnp.uint8_t val = 0
    if height * width > 0:
        with nogil:
            for i in range(n):
                if val and c[i] > 0:
                    memset(&flat[p], 1, <size_t>c[i])
                p += c[i]
                val = 1 - val
    return flat_arr.reshape((height, width), order="F")


cdef inline double _lab_f(double t) noexcept nogil:
    if t > EPS:
        return cbrt(t)
    return t * F_SCALE + F_OFFSET


cdef inline double _lab_f_inv(double t) noexcept nogil:
    if t > DELTA:
        return t * t * t
    return 3.0 * DELTA * DELTA * (t - F_OFFSET)


cdef inline void _linear_to_lab(double r, double g, double b, double* lab) noexcept nogil:
    cdef double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b
    cdef double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b
    cdef double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b
    cdef double fx = _lab_f(x / WHITE_X)
    cdef double fy = _lab_f(y)
    cdef double fz = _lab_f(z / WHITE_Z)
    lab[0] = 116.0 * fy - 16.0
    lab[1] = 500.0 * (fx - fy)
    lab[2] = 200.0 * (fy - fz)


cdef inline void _srgb_to_lab_px(double r8, double g8, double b8, double* lab) noexcept nogil:
    _linear_to_lab(_gamma_decode(r8 / 255.0), _gamma_decode(g8 / 255.0),
                   _gamma_decode(b8 / 255.0), lab)


cdef inline void _srgb_u8_to_lab_px(const cnp.uint8_t* rgb, double* lab) noexcept nogil:
    _linear_to_lab(GAMMA_DECODE_LUT[rgb[0]], GAMMA_DECODE_LUT[rgb[1]],
                   GAMMA_DECODE_LUT[rgb[2]], lab)


cdef inline double _clamp01(double v) noexcept nogil:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


cdef inline void _lab_to_srgb_px(double L, double a, double b, cnp.uint8_t* rgb) noexcept nogil:
    cdef double fy = (L + 16.0) / 116.0
    cdef double fx = fy + a / 500.0
    cdef double fz = fy - b / 200.0
    cdef double x = _lab_f_inv(fx) * WHITE_X
    cdef double y = _lab_f_inv(fy)
    cdef double z = _lab_f_inv(fz) * WHITE_Z
    cdef double rl = _clamp01(3.2404542 * x - 1.5371385 * y - 0.4985314 * z)
    cdef double gl = _clamp01(-0.9692660 * x + 1.8760108 * y + 0.0415560 * z)
    cdef double bl = _clamp01(0.0556434 * x - 0.2040259 * y + 1.0572252 * z)
    cdef double rs = floor(255.0 * _gamma_encode(rl) + 0.5)
    cdef double gs = floor(255.0 * _gamma_encode(gl) + 0.5)
    cdef double bs = floor(255.0 * _gamma_encode(bl) + 0.5)
    rgb[0] = <cnp.uint8_t>(0.0 if rs < 0.0 else (255.0 if rs > 255.0 else rs))
    rgb[1] = <cnp.uint8_t>(0.0 if gs < 0.0 else (255.0 if gs > 255.0 else gs))
    rgb[2] = <cnp.uint8_t>(0.0 if bs < 0.0 else (255.0 if bs > 255.0 else bs))


def srgb_to_lab(rgb):
    rgb_arr = np.ascontiguousarray(rgb, dtype=np.float64)
    cdef const double[:, ::1] src = rgb_arr
    cdef Py_ssize_t m = src.shape[0], i
    out_arr = np.empty((m, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(m):
            _srgb_to_lab_px(src[i, 0], src[i, 1], src[i, 2], &out[i, 0])
    return out_arr


def lab_to_srgb(lab):
    lab_arr = np.ascontiguousarray(lab, dtype=np.float64)
    cdef const double[:, ::1] src = lab_arr
    cdef Py_ssize_t m = src.shape[0], i
    out_arr = np.empty((m, 3), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    with nogil:
        for i in range(m):
            _lab_to_srgb_px(src[i, 0], src[i, 1], src[i, 2], &out[i, 0])
    return out_arr


def blend_images(const cnp.uint8_t[:, :, ::1] naive,
                 const cnp.uint8_t[:, :, ::1] relit,
                 const cnp.int32_t[:, ::1] owner,
                 const double[::1] alphas,
                 double beta):
    cdef Py_ssize_t h = naive.shape[0]
    cdef Py_ssize_t w = naive.shape[1]
    out_arr = np.asarray(relit).copy()
    cdef cnp.uint8_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef cnp.int32_t o
    cdef double a
    cdef double nlab[3]
    cdef double rlab[3]
    cdef const cnp.int32_t* orow
    with nogil:
        for y in range(h):
            orow = &owner[y, 0]
            for x in range(w):
                o = orow[x]
                if o < 0:
                    continue
                _srgb_u8_to_lab_px(&naive[y, x, 0], nlab)
                _srgb_u8_to_lab_px(&relit[y, x, 0], rlab)
                a = alphas[o]
                _lab_to_srgb_px(
                    a * nlab[0] + (1.0 - a) * rlab[0],
                    (1.0 - beta) * nlab[1] + beta * rlab[1],
                    (1.0 - beta) * nlab[2] + beta * rlab[2],
                    &out[y, x, 0],
                )
    return out_arr
