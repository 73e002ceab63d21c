"""Pure-numpy im2col/col2im, the fallback when the compiled extension is absent.

Layout contract (shared with the compiled backend):
  cols[(c*k + ky)*k + kx, oy*ow + ox] = x_padded[c, oy*stride + ky, ox*stride + kx]
col2im accumulates in flat C order of that same layout, so overlapping
contributions are summed in the identical order as the compiled loop and
the two backends agree bit for bit.
"""

import numpy as np

# (c, h, w, k, stride, pad) -> flat scatter indices into the padded image
_SCATTER_CACHE = {}


def _out_hw(h, w, k, stride, pad):
    return (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1


def im2col(x, k, stride, pad):
    c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh, ow = _out_hw(h, w, k, stride, pad)
    s0, s1, s2 = x.strides
    win = np.lib.stride_tricks.as_strided(
        x, (c, k, k, oh, ow), (s0, s1, s2, s1 * stride, s2 * stride)
    )
    return np.ascontiguousarray(win).reshape(c * k * k, oh * ow)


def col2im(cols, shape, k, stride, pad):
    c, h, w = shape
    hp, wp = h + 2 * pad, w + 2 * pad
    key = (c, h, w, k, stride, pad)
    idx = _SCATTER_CACHE.get(key)
    if idx is None:
        oh, ow = _out_hw(h, w, k, stride, pad)
        cc = np.arange(c)[:, None, None, None, None]
        ky = np.arange(k)[None, :, None, None, None]
        kx = np.arange(k)[None, None, :, None, None]
        oy = np.arange(oh)[None, None, None, :, None]
        ox = np.arange(ow)[None, None, None, None, :]
        idx = ((cc * hp + oy * stride + ky) * wp + ox * stride + kx).ravel()
        _SCATTER_CACHE[key] = idx
    flat = np.bincount(idx, weights=cols.ravel(), minlength=c * hp * wp)
    out = flat.reshape(c, hp, wp)
    if pad:
        out = out[:, pad:-pad, pad:-pad]
    return np.ascontiguousarray(out)
