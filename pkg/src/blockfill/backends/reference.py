"""Pure numpy convolution kernels (fallback backend).

Same-padding 2D cross-correlation over [batch, channel, row, col] arrays,
accumulated tap by tap in a fixed order so results are reproducible.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    batch, c_in, rows, cols = x.shape
    c_out, c_in_w, kh, kw = w.shape
    assert c_in == c_in_w, (c_in, c_in_w)
    ph, pw = kh // 2, kw // 2
    xp = np.zeros((batch, c_in, rows + 2 * ph, cols + 2 * pw), dtype=np.float64)
    xp[:, :, ph : ph + rows, pw : pw + cols] = x
    y = np.zeros((batch, c_out, rows, cols), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            tap = w[:, :, i, j]
            if not tap.any():
                continue
            y += np.einsum("oc,bcrq->borq", tap, xp[:, :, i : i + rows, j : j + cols])
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a same-padded cross-correlation: (d_input, d_weight, d_bias)."""
    batch, c_in, rows, cols = x.shape
    c_out, _, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    xp = np.zeros((batch, c_in, rows + 2 * ph, cols + 2 * pw), dtype=np.float64)
    xp[:, :, ph : ph + rows, pw : pw + cols] = x
    gxp = np.zeros_like(xp)
    gw = np.empty_like(w)
    for i in range(kh):
        for j in range(kw):
            window = xp[:, :, i : i + rows, j : j + cols]
            gw[:, :, i, j] = np.einsum("borq,bcrq->oc", gy, window)
            tap = w[:, :, i, j]
            if tap.any():
                gxp[:, :, i : i + rows, j : j + cols] += np.einsum("oc,borq->bcrq", tap, gy)
    gx = gxp[:, :, ph : ph + rows, pw : pw + cols]
    gb = gy.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(gx), gw, gb
