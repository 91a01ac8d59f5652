from __future__ import annotations

import numpy as np

from .tape import NumericError, _log_softmax


def softmax_sample(logits, temperature: float = 1.0, rng: np.random.Generator | None = None,
                   uniforms=None, greedy: bool = False, logprob_at_temperature: bool = False):
    """Draw one index per row of ``logits`` from softmax(logits / temperature).

    ``uniforms`` (one per row) may be supplied instead of ``rng`` so callers can
    control the random stream. The returned log-probability is under the
    temperature-1 distribution unless ``logprob_at_temperature`` is set.
    Works on a single logits vector or a (B, K) batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if not np.isfinite(logits).all():
        raise NumericError("non-finite logits")
    single = logits.ndim == 1
    x = logits[None, :] if single else logits
    logp_t = _log_softmax(x / temperature)
    if greedy:
        idx = np.argmax(x, axis=1)
    else:
        if uniforms is None:
            uniforms = rng.random(x.shape[0])
        u = np.atleast_1d(np.asarray(uniforms, dtype=np.float64))
        cdf = np.cumsum(np.exp(logp_t), axis=1)
        idx = np.minimum((cdf < u[:, None] * cdf[:, -1:]).sum(axis=1), x.shape[1] - 1)
    ref = logp_t if logprob_at_temperature else _log_softmax(x)
    lp = ref[np.arange(x.shape[0]), idx]
    if single:
        return int(idx[0]), float(lp[0])
    return idx, lp
