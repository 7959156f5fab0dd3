"""Pure-numpy batched LSTM kernels (fallback for the compiled extension).

All arrays are time-major float64: ``X`` is ``(T, B, n_in)``; fused weights
``Wx (n_in, 4H)``, ``Vh (H, 4H)``, ``b (4H,)`` in gate order f, i, o, c.
"""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(X, Wx, Vh, b):
    """Run the cell over all steps from a zero state.

    Returns ``(gates, C, Hs, TC)``: activated gates ``(T, B, 4H)``, cell states
    ``(T+1, B, H)`` and hidden states ``(T+1, B, H)`` (index 0 is the initial
    zero state), and ``tanh(c_t)`` ``(T, B, H)``.
    """
    T, B, n_in = X.shape
    H = Vh.shape[0]
    Z = (X.reshape(T * B, n_in) @ Wx + b).reshape(T, B, 4 * H)
    gates = np.empty_like(Z)
    C = np.zeros((T + 1, B, H))
    Hs = np.zeros((T + 1, B, H))
    TC = np.empty((T, B, H))
    H3 = 3 * H
    for t in range(T):
        z = Z[t] + Hs[t] @ Vh
        g = gates[t]
        g[:, :H3] = sigmoid(z[:, :H3])
        g[:, H3:] = np.tanh(z[:, H3:])
        C[t + 1] = g[:, :H] * C[t] + g[:, H : 2 * H] * g[:, H3:]
        TC[t] = np.tanh(C[t + 1])
        Hs[t + 1] = g[:, 2 * H : H3] * TC[t]
    return gates, C, Hs, TC


def lstm_backward(X, Vh, gates, C, Hs, TC, dH):
    """Reverse accumulation through the unfolded sequence.

    ``dH`` holds the loss gradient w.r.t. each ``h_t`` (``(T, B, H)``).
    Returns ``(dWx, dVh, db)``.
    """
    T, B, n_in = X.shape
    H = Vh.shape[0]
    dZ = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        g = gates[t]
        f, i, o, gg = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        tc = TC[t]
        dh = dH[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dZ[t]
        dz[:, :H] = dc * C[t] * f * (1.0 - f)
        dz[:, H : 2 * H] = dc * gg * i * (1.0 - i)
        dz[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H :] = dc * i * (1.0 - gg * gg)
        dc_next = dc * f
        dh_next = dz @ Vh.T
    dZ2 = dZ.reshape(T * B, 4 * H)
    dWx = X.reshape(T * B, n_in).T @ dZ2
    dVh = Hs[:-1].reshape(T * B, H).T @ dZ2
    db = dZ2.sum(axis=0)
    return dWx, dVh, db
