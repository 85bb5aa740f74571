"""Shared test oracles: central finite differences for gradient checks."""

import numpy as np


def fd_check(make_loss, params, h=1e-5, n_samples=8, seed=0, tol=1e-4, zero_tol=1e-8):
    """Check autodiff gradients of scalar make_loss() against central FD.

    `make_loss` must rebuild the graph from the params' current .data every
    call. Samples coordinates per parameter; asserts relative error <= tol
    wherever the analytic gradient is above zero_tol. Returns the max
    relative error seen.
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.grad = None
    loss = make_loss()
    loss.backward()
    worst = 0.0
    for p in params:
        assert p.grad is not None, "parameter did not receive a gradient"
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        idx = rng.choice(flat.size, size=min(n_samples, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = make_loss().item()
            flat[i] = orig - h
            fm = make_loss().item()
            flat[i] = orig
            num = (fp - fm) / (2.0 * h)
            ana = gflat[i]
            if abs(ana) <= zero_tol and abs(num) <= zero_tol:
                continue
            rel = abs(num - ana) / max(abs(num), abs(ana), zero_tol)
            worst = max(worst, rel)
            assert rel <= tol, f"grad mismatch at flat index {i}: analytic {ana}, fd {num}, rel {rel}"
    return worst
