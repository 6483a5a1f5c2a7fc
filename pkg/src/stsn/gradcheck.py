"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .errors import ContractError


def relative_error(analytic, numeric, floor=1e-8):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_gradient(f, x, step, indices=None):
    """Central differences of scalar ``f`` w.r.t. array ``x`` (perturbed in place)."""
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(flat.size, dtype=np.float64)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + step
        fp = np.asarray(f())  # keep the working precision (may exceed float64)
        flat[i] = orig - step
        fm = np.asarray(f())
        flat[i] = orig
        out[i] = (fp - fm) / (2 * step)
    return out.reshape(x.shape)


def finite_difference_check(f, x, step=1e-3, analytic=None, indices=None):
    """Max relative error between the analytic and central-difference gradient.

    ``f`` is a zero-argument callable returning a scalar :class:`Tensor`
    built from the tensor ``x``; ``analytic`` may be supplied when the
    caller already ran backward. ``indices`` restricts the comparison to a
    subset of flattened coordinates.
    """
    if step <= 0:
        raise ContractError("step must be positive")
    x.grad = None
    y = f()
    if not np.isfinite(y.item()):
        raise ContractError("f(x) is not finite")
    if analytic is None:
        y.backward()
        analytic = np.zeros_like(x.data) if x.grad is None else x.grad
    numeric = numeric_gradient(lambda: f().data.reshape(-1)[0], x.data, step, indices)
    err = relative_error(analytic, numeric)
    if indices is not None:
        err = err.reshape(-1)[list(indices)]
    return float(err.max()) if err.size else 0.0


def check_module_gradients(loss_fn, params, step=1e-3, max_coords=None, rng=None):
    """Run a finite-difference check over every tensor in ``params``.

    Returns a dict name -> max relative error. When ``max_coords`` is given,
    that many coordinates per tensor are sampled with ``rng``.
    """
    for p in params.values():
        p.grad = None
    loss_fn().backward()
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for k, p in params.items()}
    report = {}
    for name, p in params.items():
        n = p.data.size
        if max_coords is not None and n > max_coords:
            idx = sorted((rng or np.random.default_rng(0)).choice(n, size=max_coords, replace=False).tolist())
        else:
            idx = list(range(n))
        numeric = numeric_gradient(lambda: loss_fn().data.reshape(-1)[0], p.data, step, idx)
        err = relative_error(analytic[name].reshape(-1)[idx], numeric.reshape(-1)[idx])
        report[name] = float(err.max()) if err.size else 0.0
    return report


MICRO = dict(
    image_size=8,
    K=2,
    D_slot=4,
    T=2,
    L=1,
    H=1,
    D_head=4,
    D_MLP=8,
    enc_channels=4,
    dec_channels=4,
    dec_layers=1,
    dropout=0.0,
)


def micro_model_check(seed=0, lam=1000.0, step=1e-6, max_coords=6, dtype=np.longdouble):
    """Finite-difference check of the full training loss on a micro model.

    A fixed slot-noise draw makes the loss a deterministic function of the
    parameters, ``log_sigma`` included. Extended precision matters here:
    with the loss near 1e3 and many gradient entries near 1e-6, float64
    rounding alone puts central differences off by ~1e-3 relative.
    Returns the per-tensor report; its max is the headline error.
    """
    from .config import TrainConfig
    from .model import STSN
    from .tensor import precision

    cfg = TrainConfig(lam=lam, seed=seed, **MICRO)
    rng = np.random.default_rng(seed)
    with precision(dtype):
        model = STSN(cfg, np.random.default_rng(seed))
        images = rng.random((1, 16, cfg.image_size, cfg.image_size, 1)).astype(dtype)
        answers = np.array([int(rng.integers(8))])

        def loss():
            return model(images, answers, np.random.default_rng(seed + 1)).loss

        return check_module_gradients(loss, model.named_parameters(), step, max_coords, np.random.default_rng(seed))
