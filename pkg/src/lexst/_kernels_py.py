"""Pure numpy kernels for the attention-pooling classifier.

Same signatures as the compiled ``_kernels`` module. Documents are passed
packed: ``tokens`` holds all token ids back to back and document ``i`` spans
``tokens[offsets[i]:offsets[i + 1]]``. ``masks`` is either None (no dropout)
or an ``(N, d)`` array of already-scaled dropout multipliers.
"""

import numpy as np


def _softmax(x):
    z = np.exp(x - x.max())
    return z / z.sum()


def forward_batch(E, A, ba, u, W, b, tokens, offsets, slope, masks=None):
    n = len(offsets) - 1
    probs = np.empty((n, W.shape[0]))
    attn = np.empty(len(tokens))
    context = np.empty((n, E.shape[1]))
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        x = E[tokens[lo:hi]]
        alpha = _softmax(np.tanh(x @ A.T + ba) @ u)
        v = alpha @ x
        h = np.where(v > 0, v, slope * v)
        if masks is not None:
            h = h * masks[i]
        probs[i] = _softmax(W @ h + b)
        attn[lo:hi] = alpha
        context[i] = v
    return probs, attn, context


def loss_grad_batch(E, A, ba, u, W, b, tokens, offsets, labels, slope, masks,
                    gE, gA, gba, gu, gW, gb):
    """Accumulate summed cross-entropy gradients into the ``g*`` arrays.

    Returns the summed loss over the batch.
    """
    total = 0.0
    for i in range(len(offsets) - 1):
        ids = tokens[offsets[i]:offsets[i + 1]]
        x = E[ids]
        hid = np.tanh(x @ A.T + ba)
        alpha = _softmax(hid @ u)
        v = alpha @ x
        slope_v = np.where(v > 0, 1.0, slope)
        h = v * slope_v
        mask = masks[i] if masks is not None else 1.0
        h = h * mask
        logits = W @ h + b
        m = logits.max()
        lse = m + np.log(np.exp(logits - m).sum())
        y = labels[i]
        total += lse - logits[y]

        dlogits = np.exp(logits - lse)
        dlogits[y] -= 1.0
        gW += np.outer(dlogits, h)
        gb += dlogits
        dv = (W.T @ dlogits) * mask * slope_v
        dalpha = x @ dv
        ds = alpha * (dalpha - alpha @ dalpha)
        gu += ds @ hid
        dz = np.outer(ds, u) * (1.0 - hid * hid)
        gA += dz.T @ x
        gba += dz.sum(axis=0)
        dx = dz @ A + np.outer(alpha, dv)
        np.add.at(gE, ids, dx)
    return total
