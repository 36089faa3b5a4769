"""Central finite-difference helpers shared by the gradient tests."""
import numpy as np

EPS = 1e-5
# below this norm a gradient is treated as numerically zero
NORM_FLOOR = 1e-6


def numeric_grad(f, p: np.ndarray, eps: float = EPS) -> np.ndarray:
    g = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        orig = p[idx]
        p[idx] = orig + eps
        up = f()
        p[idx] = orig - eps
        down = f()
        p[idx] = orig
        g[idx] = (up - down) / (2 * eps)
    return g


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), NORM_FLOOR)
    return float(np.linalg.norm(analytic - numeric) / scale)


def model_grad_errors(model, x, y, dropout_seed: int = 0) -> dict[str, float]:
    """Relative error per parameter tensor for model.loss_and_grads."""
    _, grads = model.loss_and_grads(x, y, np.random.default_rng(dropout_seed))

    def loss():
        return model.loss_and_grads(x, y, np.random.default_rng(dropout_seed))[0]

    return {name: rel_error(grads[name], numeric_grad(loss, p)) for name, p in model.params.items()}
