"""Counter-based Gaussian variates.

Every random number is a pure function of ``(seed, path_index, step)``:
the Philox4x32-10 counter is ``(block_lo, block_hi, path_index, stream)``
and the key is the 64-bit seed split into two 32-bit words.  One Philox
block carries 128 bits, turned into two normals by the ZIGNOR ziggurat
(Doornik, 2005), so increment ``i`` of a path reads block ``i // 2``.
Ziggurat rejections draw fresh words from streams keyed by the same step,
so the output never depends on the order in which paths are processed.
"""

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S21 = np.uint64(21)
_S11 = np.uint64(11)
_LOW7 = np.uint64(127)
_LOW53 = np.uint64(0x1FFFFFFFFFFFFF)
_INV_2_53 = 1.0 / 9007199254740992.0

STREAM_INCREMENTS = 0
STREAM_AUX = 1
STREAM_BRIDGE_MAX = 2
STREAM_BRIDGE_MIN = 3
_STREAM_ZIG = 4


def _zignor_tables(n=128, r=3.442619855899, v=9.91256303526217e-3):
    x = np.zeros(n + 1)
    f = math.exp(-0.5 * r * r)
    x[0] = v / f
    x[1] = r
    for i in range(2, n):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    return x, x[1:] / x[:-1]


_ZIG_R = 3.442619855899
_ZIG_X, _ZIG_RATIO = _zignor_tables()


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox4x32 rounds; all arguments are uint64 holding 32-bit words."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _S32) ^ c1 ^ k0) & _MASK
        n1 = p1 & _MASK
        n2 = ((p0 >> _S32) ^ c3 ^ k1) & _MASK
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _block(seed, path_index, block, stream):
    s = np.uint64(seed)
    b = np.uint64(block)
    x0, x1, x2, x3 = philox4x32(
        b & _MASK, (b >> _S32) & _MASK,
        np.uint64(path_index) & _MASK, np.uint64(stream) & _MASK,
        s & _MASK, (s >> _S32) & _MASK)
    return (x0 << _S32) | x1, (x2 << _S32) | x3


@nb.njit(cache=True, inline="always")
def _to_unit(w):
    return (np.float64(w & _LOW53) + 0.5) * _INV_2_53


@nb.njit(cache=True, inline="always")
def uniform_pair(seed, path_index, block, stream):
    """Two uniforms in (0, 1) with 53-bit resolution."""
    w0, w1 = _block(seed, path_index, block, stream)
    return _to_unit(w0), _to_unit(w1)


@nb.njit(cache=True)
def _zig_slow(seed, path_index, step, i, u):
    # wedge and tail of the ziggurat; extra words come from streams >= 4
    att = 0
    while True:
        if att > 0:
            w1, w2 = uniform_pair(seed, path_index, step, _STREAM_ZIG + att)
            u = 2.0 * w1 - 1.0
            i = np.int64(w2 * 128.0)
            if abs(u) < _ZIG_RATIO[i]:
                return u * _ZIG_X[i]
        if i == 0:
            while True:
                att += 1
                a, b = uniform_pair(seed, path_index, step, _STREAM_ZIG + att)
                x = math.log(a) / _ZIG_R
                y = math.log(b)
                if -2.0 * y >= x * x:
                    break
            return x - _ZIG_R if u < 0.0 else _ZIG_R - x
        x = u * _ZIG_X[i]
        f0 = math.exp(-0.5 * (_ZIG_X[i] * _ZIG_X[i] - x * x))
        f1 = math.exp(-0.5 * (_ZIG_X[i + 1] * _ZIG_X[i + 1] - x * x))
        att += 1
        a, _ = uniform_pair(seed, path_index, step, _STREAM_ZIG + att)
        if f1 + a * (f0 - f1) < 1.0:
            return x
        att += 1


@nb.njit(cache=True, inline="always")
def _zig_from_word(seed, path_index, step, w):
    i = np.int64(w & _LOW7)
    u = 2.0 * ((np.float64(w >> _S11) + 0.5) * _INV_2_53) - 1.0
    if abs(u) < _ZIG_RATIO[i]:
        return u * _ZIG_X[i]
    return _zig_slow(seed, path_index, step, i, u)


@nb.njit(cache=True, inline="always")
def normal_pair(seed, path_index, block):
    """Standard normals for increments ``2*block`` and ``2*block + 1``."""
    w0, w1 = _block(seed, path_index, block, STREAM_INCREMENTS)
    z0 = _zig_from_word(seed, path_index, 2 * block, w0)
    z1 = _zig_from_word(seed, path_index, 2 * block + 1, w1)
    return z0, z1


@nb.njit(cache=True)
def normals(seed, path_index, n):
    """The first ``n`` increments' standard normals of one path."""
    out = np.empty(n)
    for b in range((n + 1) // 2):
        z0, z1 = normal_pair(seed, path_index, b)
        out[2 * b] = z0
        if 2 * b + 1 < n:
            out[2 * b + 1] = z1
    return out


@nb.njit(cache=True)
def aux_uniform(seed, path_index, slot):
    """Auxiliary uniform (randomisation coins), independent of the increments."""
    u1, u2 = uniform_pair(seed, path_index, slot // 2, STREAM_AUX)
    return u1 if slot % 2 == 0 else u2
