"""Central finite-difference gradient checks shared by the model tests."""

import numpy as np


def check_gradients(arrays, loss_fn, grads, rng, n_probe=12, h=1e-5, rtol=1e-4, atol=1e-8, after=None):
    """Compare ``grads`` with central differences on ``n_probe`` random entries per array.

    ``loss_fn()`` evaluates the loss at the current (in-place perturbed) arrays;
    ``after`` runs after each perturbation (e.g. cache invalidation).
    Returns the worst relative error seen.
    """
    worst = 0.0
    for a, g in zip(arrays, grads):
        assert g.shape == a.shape
        flat, gflat = a.reshape(-1), g.reshape(-1)
        idx = rng.choice(flat.size, size=min(n_probe, flat.size), replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            after and after()
            lp = loss_fn()
            flat[i] = old - h
            after and after()
            lm = loss_fn()
            flat[i] = old
            after and after()
            num = (lp - lm) / (2 * h)
            err = abs(num - gflat[i])
            scale = max(abs(num), abs(gflat[i]))
            assert err <= rtol * scale + atol, f"entry {i}: analytic {gflat[i]!r} vs numeric {num!r}"
            if scale > atol / rtol:
                worst = max(worst, err / scale)
    return worst
