import numpy as np
import pytest


def fd_gradcheck(build_loss, params, rng, n_samples=40, step=1e-5, tol=1e-4):
    """Compare analytic gradients of a scalar loss against central finite
    differences at randomly sampled parameter entries.

    build_loss() must re-evaluate the graph from the current parameter
    values. Returns the worst relative error seen.
    """
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

    sizes = np.array([p.data.size for p in params])
    total = sizes.sum()
    picks = rng.choice(total, size=min(n_samples, total), replace=False)
    bounds = np.cumsum(sizes)
    worst = 0.0
    for flat in picks:
        pi = int(np.searchsorted(bounds, flat, side="right"))
        idx = int(flat - (bounds[pi - 1] if pi > 0 else 0))
        p = params[pi]
        orig = p.data.reshape(-1)[idx]
        p.data.reshape(-1)[idx] = orig + step
        lp = build_loss().item()
        p.data.reshape(-1)[idx] = orig - step
        lm = build_loss().item()
        p.data.reshape(-1)[idx] = orig
        fd = (lp - lm) / (2 * step)
        an = analytic[pi].reshape(-1)[idx]
        rel = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
        worst = max(worst, rel)
    assert worst < tol, f"finite-difference mismatch: worst rel error {worst:.3e}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
