import numpy as np


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def max_param_fd_error(params, grads, objective, h=1e-5):
    """Worst relative error between analytic grads and central differences."""
    worst = 0.0
    for pi, p in enumerate(params):
        flat = p.ravel()
        gflat = grads[pi].ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = objective()
            flat[k] = orig - h
            down = objective()
            flat[k] = orig
            fd = (up - down) / (2.0 * h)
            worst = max(worst, rel_err(fd, gflat[k]))
    return worst


def numerical_jacobian(fn, x, h=1e-6):
    """Dense Jacobian of a vector map by central differences."""
    x = np.asarray(x, dtype=np.float64)
    y0 = fn(x)
    jac = np.zeros((y0.size, x.size))
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (fn(xp) - fn(xm)) / (2.0 * h)
    return jac
