"""Pure-Python kernels; reference semantics for the compiled ``_ckernels``.

Both modules expose the same functions operating on the same flat float64
state vectors, so either can be swapped in at import time.
"""
import math

import numpy as np

# Per-channel LEVD layout (offset CH_STRIDE * channel)
(MODE, CAND, CAND_T, HI, HI_T, LO, LO_T, LAST_MAX, LAST_MAX_T, LAST_MIN, LAST_MIN_T,
 PREV_MAX, PREV_MIN, STATIC, STATIC_OK, REFRESH_T, ET0, ET1, ET2, ET3) = range(20)
CH_STRIDE = 20
HAS_PHASE = 2 * CH_STRIDE
LAST_WRAPPED = HAS_PHASE + 1
UNWRAPPED = HAS_PHASE + 2
LEVD_STATE_LEN = UNWRAPPED + 1

MODE_EMPTY = -2.0
MODE_UNDECIDED = 0.0
MODE_SEEK_MAX = 1.0
MODE_SEEK_MIN = -1.0

TWO_PI = 2.0 * math.pi


def new_levd_state():
    nan = float("nan")
    st = np.zeros(LEVD_STATE_LEN)
    for c in (0, 1):
        o = c * CH_STRIDE
        st[o + MODE] = MODE_EMPTY
        for k in (LAST_MAX, LAST_MAX_T, LAST_MIN, LAST_MIN_T, PREV_MAX, PREV_MIN, REFRESH_T,
                  ET0, ET1, ET2, ET3):
            st[o + k] = nan
    return st


def _between(st, o, lo, hi):
    """How many of a channel's recent extremum times fall in ``(lo, hi]``."""
    n = 0
    for k in (ET0, ET1, ET2, ET3):
        e = st[o + k]
        if lo < e <= hi:
            n += 1
    return n


def _confirm(st, o, oo, kind, value, t, pp_threshold, tol):
    """Record a confirmed extremum and maybe refresh the channel's static value.

    A refresh needs the last three extrema to alternate max/min/max (or
    min/max/min) with peak-to-peak >= ``pp_threshold`` and the two same-kind
    values within ``tol`` of each other.  The other channel (state offset
    ``oo``) must also have exactly one extremum inside each half of the
    triple: on a genuine rotation it peaks a quarter turn away, whereas a
    finger reversing direction makes both channels turn at once.  Averaging
    the same-kind pair cancels a linearly changing echo amplitude.
    """
    t1 = st[o + ET0]
    t2 = st[o + ET1]
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
    if other != other or same != same or t2 != t2:
        return
    if abs(value - other) >= pp_threshold and abs(value - same) <= tol * abs(value - other) \
            and _between(st, oo, t2, t1) == 1 and _between(st, oo, t1, t) == 1:
        st[o + STATIC] = 0.5 * (0.5 * (value + same) + other)
        st[o + STATIC_OK] = 1.0
        st[o + REFRESH_T] = t


def _channel_step(st, c, v, t, pp_threshold, hyst, tol, ext, n_ext):
    o = c * CH_STRIDE
    mode = st[o + MODE]
    if mode == MODE_EMPTY:
        st[o + MODE] = MODE_UNDECIDED
        st[o + HI] = st[o + LO] = v
        st[o + HI_T] = st[o + LO_T] = t
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
            kind, val, vt = 1.0, st[o + HI], st[o + HI_T]
            st[o + MODE] = MODE_SEEK_MIN
        elif v >= st[o + LO] + hyst:
            kind, val, vt = -1.0, st[o + LO], st[o + LO_T]
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
        kind, val, vt = 1.0, st[o + CAND], st[o + CAND_T]
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
        kind, val, vt = -1.0, st[o + CAND], st[o + CAND_T]
        st[o + MODE] = MODE_SEEK_MAX
        st[o + CAND] = v
        st[o + CAND_T] = t
    _confirm(st, o, (1 - c) * CH_STRIDE, kind, val, vt, pp_threshold, tol)
    ext[n_ext] = [c, kind, val, vt]
    return n_ext + 1


def levd_unwrap(re, im, t, st, pp_threshold, hyst, tol, gate, dyn_re, dyn_im, phase, ext):
    """Run LEVD static-vector removal and gated phase unwrapping over a block.

    The phase is held until both channels have locked a static estimate, and
    afterwards whenever the dynamic vector is shorter than ``gate``.

    Writes the dynamic vector and the cumulative unwrapped phase per sample;
    confirmed extrema go to ``ext`` rows ``(channel, +1 max / -1 min, value, time)``.
    Returns the number of extrema written.
    """
    s = st.tolist()
    re_l, im_l, t_l = re.tolist(), im.tolist(), t.tolist()
    n = len(re_l)
    out_r = [0.0] * n
    out_i = [0.0] * n
    out_p = [0.0] * n
    rows = [[0.0] * 4 for _ in range(2 * n)]
    gate2 = gate * gate
    n_ext = 0
    for i in range(n):
        ti = t_l[i]
        n_ext = _channel_step(s, 0, re_l[i], ti, pp_threshold, hyst, tol, rows, n_ext)
        n_ext = _channel_step(s, 1, im_l[i], ti, pp_threshold, hyst, tol, rows, n_ext)
        dr = re_l[i] - s[STATIC]
        di = im_l[i] - s[CH_STRIDE + STATIC]
        out_r[i] = dr
        out_i[i] = di
        # no phase accumulates until both channels hold a static estimate
        if s[STATIC_OK] and s[CH_STRIDE + STATIC_OK] and dr * dr + di * di >= gate2:
            w = math.atan2(di, dr)
            if s[HAS_PHASE] == 0.0:
                s[HAS_PHASE] = 1.0
            else:
                d = w - s[LAST_WRAPPED]
                if d > math.pi:
                    d -= TWO_PI
                elif d <= -math.pi:
                    d += TWO_PI
                s[UNWRAPPED] += d
            s[LAST_WRAPPED] = w
        out_p[i] = s[UNWRAPPED]
    st[:] = s
    dyn_re[:n] = out_r
    dyn_im[:n] = out_i
    phase[:n] = out_p
    if n_ext:
        ext[:n_ext] = rows[:n_ext]
    return n_ext


def hp_threshold_detect(ax, ay, az, t, b, a, zi, st, threshold, refractory, mag, det):
    """Biquad high-pass on three axes, then magnitude threshold with refractory.

    ``b``/``a`` are normalized biquad coefficients (a[0] == 1), ``zi`` is a
    3x2 transposed-direct-form-II state, ``st[0]`` the time of the last
    detection (NaN if none).  Returns the number of detection times in ``det``.
    """
    b0, b1, b2 = float(b[0]), float(b[1]), float(b[2])
    a1, a2 = float(a[1]), float(a[2])
    z = zi.tolist()
    last = float(st[0])
    axes = (ax.tolist(), ay.tolist(), az.tolist())
    t_l = t.tolist()
    n = len(t_l)
    out_m = [0.0] * n
    found = []
    for i in range(n):
        acc = 0.0
        for k in range(3):
            x = axes[k][i]
            zk = z[k]
            y = b0 * x + zk[0]
            zk[0] = b1 * x - a1 * y + zk[1]
            zk[1] = b2 * x - a2 * y
            acc += y * y
        m = math.sqrt(acc)
        out_m[i] = m
        if m > threshold and (last != last or t_l[i] - last >= refractory):
            last = t_l[i]
            found.append(last)
    zi[:] = z
    st[0] = last
    mag[:n] = out_m
    det[:len(found)] = found
    return len(found)
