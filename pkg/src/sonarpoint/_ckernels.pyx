# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.  Same contracts as ``_kernels_py``; see that module for docs."""
from libc.math cimport atan2, sqrt, isnan, fabs, M_PI

cdef enum:
    CH_STRIDE = 20
    MODE = 0
    CAND = 1
    CAND_T = 2
    HI = 3
    HI_T = 4
    LO = 5
    LO_T = 6
    LAST_MAX = 7
    LAST_MAX_T = 8
    LAST_MIN = 9
    LAST_MIN_T = 10
    PREV_MAX = 11
    PREV_MIN = 12
    STATIC = 13
    STATIC_OK = 14
    REFRESH_T = 15
    ET0 = 16
    ET1 = 17
    ET2 = 18
    ET3 = 19
    HAS_PHASE = 40
    LAST_WRAPPED = 41
    UNWRAPPED = 42

cdef double MODE_EMPTY = -2.0
cdef double MODE_UNDECIDED = 0.0
cdef double MODE_SEEK_MAX = 1.0
cdef double MODE_SEEK_MIN = -1.0


cdef inline int _between(double[::1] st, int o, double lo, double hi) noexcept nogil:
    cdef int n = 0
    cdef int k
    cdef double e
    for k in range(ET0, ET3 + 1):
        e = st[o + k]
        if lo < e <= hi:
            n += 1
    return n


cdef inline void _confirm(double[::1] st, int o, int oo, double kind, double value, double t,
                          double pp_threshold, double tol) noexcept nogil:
    cdef double other, same
    cdef double t1 = st[o + ET0]
    cdef double t2 = st[o + ET1]
    st[o + ET3] = st[o + ET2]
    st[o + ET2] = t2
    st[o + ET1] = t1
    st[o + ET0] = t
    if kind > 0:
        same = st[o + LAST_MAX]
        st[o + PREV_MAX] = same
        st[o + LAST_MAX] = value
        st[o + LAST_MAX_T] = t
        other = st[o + LAST_MIN]
    else:
        same = st[o + LAST_MIN]
        st[o + PREV_MIN] = same
        st[o + LAST_MIN] = value
        st[o + LAST_MIN_T] = t
        other = st[o + LAST_MAX]
    if isnan(other) or isnan(same) or isnan(t2):
        return
    if (fabs(value - other) >= pp_threshold and fabs(value - same) <= tol * fabs(value - other)
            and _between(st, oo, t2, t1) == 1 and _between(st, oo, t1, t) == 1):
        st[o + STATIC] = 0.5 * (0.5 * (value + same) + other)
        st[o + STATIC_OK] = 1.0
        st[o + REFRESH_T] = t


cdef inline int _channel_step(double[::1] st, int c, double v, double t, double pp_threshold,
                              double hyst, double tol, double[:, ::1] ext, int n_ext) noexcept nogil:
    cdef int o = c * CH_STRIDE
    cdef double mode = st[o + MODE]
    cdef double kind, val, vt
    if mode == MODE_EMPTY:
        st[o + MODE] = MODE_UNDECIDED
        st[o + HI] = v
        st[o + LO] = v
        st[o + HI_T] = t
        st[o + LO_T] = t
        st[o + STATIC] = v
        return n_ext
    if mode == MODE_UNDECIDED:
        if v > st[o + HI]:
            st[o + HI] = v
            st[o + HI_T] = t
        if v < st[o + LO]:
            st[o + LO] = v
            st[o + LO_T] = t
        if v <= st[o + HI] - hyst:
            kind = 1.0
            val = st[o + HI]
            vt = st[o + HI_T]
            st[o + MODE] = MODE_SEEK_MIN
        elif v >= st[o + LO] + hyst:
            kind = -1.0
            val = st[o + LO]
            vt = st[o + LO_T]
            st[o + MODE] = MODE_SEEK_MAX
        else:
            return n_ext
        st[o + CAND] = v
        st[o + CAND_T] = t
    elif mode == MODE_SEEK_MAX:
        if v > st[o + CAND]:
            st[o + CAND] = v
            st[o + CAND_T] = t
            return n_ext
        if v > st[o + CAND] - hyst:
            return n_ext
        kind = 1.0
        val = st[o + CAND]
        vt = st[o + CAND_T]
        st[o + MODE] = MODE_SEEK_MIN
        st[o + CAND] = v
        st[o + CAND_T] = t
    else:
        if v < st[o + CAND]:
            st[o + CAND] = v
            st[o + CAND_T] = t
            return n_ext
        if v < st[o + CAND] + hyst:
            return n_ext
        kind = -1.0
        val = st[o + CAND]
        vt = st[o + CAND_T]
        st[o + MODE] = MODE_SEEK_MAX
        st[o + CAND] = v
        st[o + CAND_T] = t
    _confirm(st, o, (1 - c) * CH_STRIDE, kind, val, vt, pp_threshold, tol)
    ext[n_ext, 0] = c
    ext[n_ext, 1] = kind
    ext[n_ext, 2] = val
    ext[n_ext, 3] = vt
    return n_ext + 1


def levd_unwrap(const double[::1] re, const double[::1] im, const double[::1] t,
                double[::1] st, double pp_threshold, double hyst, double tol, double gate,
                double[::1] dyn_re, double[::1] dyn_im, double[::1] phase,
                double[:, ::1] ext):
    cdef Py_ssize_t i, n = re.shape[0]
    cdef int n_ext = 0
    cdef double dr, di, w, d, ti
    cdef double gate2 = gate * gate
    with nogil:
        for i in range(n):
            ti = t[i]
            n_ext = _channel_step(st, 0, re[i], ti, pp_threshold, hyst, tol, ext, n_ext)
            n_ext = _channel_step(st, 1, im[i], ti, pp_threshold, hyst, tol, ext, n_ext)
            dr = re[i] - st[STATIC]
            di = im[i] - st[CH_STRIDE + STATIC]
            dyn_re[i] = dr
            dyn_im[i] = di
            if st[STATIC_OK] != 0.0 and st[CH_STRIDE + STATIC_OK] != 0.0 and dr * dr + di * di >= gate2:
                w = atan2(di, dr)
                if st[HAS_PHASE] == 0.0:
                    st[HAS_PHASE] = 1.0
                else:
                    d = w - st[LAST_WRAPPED]
                    if d > M_PI:
                        d -= 2.0 * M_PI
                    elif d <= -M_PI:
                        d += 2.0 * M_PI
                    st[UNWRAPPED] += d
                st[LAST_WRAPPED] = w
            phase[i] = st[UNWRAPPED]
    return n_ext


def hp_threshold_detect(const double[::1] ax, const double[::1] ay, const double[::1] az,
                        const double[::1] t, const double[::1] b, const double[::1] a,
                        double[:, ::1] zi, double[::1] st, double threshold,
                        double refractory, double[::1] mag, double[::1] det):
    cdef Py_ssize_t i, k, n = t.shape[0]
    cdef int n_det = 0
    cdef double b0 = b[0], b1 = b[1], b2 = b[2], a1 = a[1], a2 = a[2]
    cdef double x, y, acc, m
    cdef double last = st[0]
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(3):
                if k == 0:
                    x = ax[i]
                elif k == 1:
                    x = ay[i]
                else:
                    x = az[i]
                y = b0 * x + zi[k, 0]
                zi[k, 0] = b1 * x - a1 * y + zi[k, 1]
                zi[k, 1] = b2 * x - a2 * y
                acc += y * y
            m = sqrt(acc)
            mag[i] = m
            if m > threshold and (isnan(last) or t[i] - last >= refractory):
                last = t[i]
                det[n_det] = last
                n_det += 1
    st[0] = last
    return n_det
