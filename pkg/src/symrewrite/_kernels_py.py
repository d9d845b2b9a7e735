"""Pure-numpy kernels; reference behaviour for the compiled ``_kernels`` module.

Gate layout along the last axis of the LSTM pre-activation is ``[i f g o]``.
"""

import numpy as np


def lstm_forward(pre, c_prev):
    """Pointwise LSTM cell. Returns ``(h, c, acts, tanh_c)``."""
    H = c_prev.shape[1]
    scale = np.full(4 * H, 0.5)
    scale[2 * H:3 * H] = 1.0
    acts = np.tanh(pre * scale)
    acts[:, :2 * H] = 0.5 * (1.0 + acts[:, :2 * H])
    acts[:, 3 * H:] = 0.5 * (1.0 + acts[:, 3 * H:])
    i, f, g, o = acts[:, :H], acts[:, H:2 * H], acts[:, 2 * H:3 * H], acts[:, 3 * H:]
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, acts, tanh_c


def lstm_backward(dh, dc, acts, c_prev, tanh_c):
    """Gradients w.r.t. the pre-activation and the previous cell state."""
    H = c_prev.shape[1]
    i, f, g, o = acts[:, :H], acts[:, H:2 * H], acts[:, 2 * H:3 * H], acts[:, 3 * H:]
    dct = dc + dh * o * (1.0 - tanh_c * tanh_c)
    dpre = np.empty_like(acts)
    dpre[:, :H] = dct * g * i * (1.0 - i)
    dpre[:, H:2 * H] = dct * c_prev * f * (1.0 - f)
    dpre[:, 2 * H:3 * H] = dct * i * (1.0 - g * g)
    dpre[:, 3 * H:] = dh * tanh_c * o * (1.0 - o)
    return dpre, dct * f


def xent_forward(logits, targets, ignore):
    """Summed cross-entropy over rows whose target is not ``ignore``.

    Returns ``(loss_sum, probs)``; ``probs`` is the row softmax.
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=1, keepdims=True)
    probs = e / z
    keep = targets != ignore
    rows = np.nonzero(keep)[0]
    nll = np.log(z[rows, 0]) - shifted[rows, targets[rows]]
    return float(nll.sum()), probs


def xent_backward(probs, targets, ignore, scale):
    """``scale * (softmax - onehot)`` with ignored rows zeroed."""
    d = probs * scale
    keep = targets != ignore
    rows = np.nonzero(keep)[0]
    d[rows, targets[rows]] -= scale
    d[~keep] = 0.0
    return d
