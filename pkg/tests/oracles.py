"""Independent reference computations used only by the tests."""

import math

import numpy as np


def direct_dft(x, m1, m2):
    """O(N^2 M^2) summation of the zero-padded DFT, no FFT involved."""
    n1, n2 = x.shape
    out = np.zeros((m1, m2), dtype=complex)
    for k1 in range(m1):
        for k2 in range(m2):
            acc = 0j
            for a in range(n1):
                for b in range(n2):
                    if x[a, b] != 0:
                        acc += x[a, b] * complex(
                            math.cos(-2 * math.pi * (k1 * a / m1 + k2 * b / m2)),
                            math.sin(-2 * math.pi * (k1 * a / m1 + k2 * b / m2)),
                        )
            out[k1, k2] = acc
    return out


def shift_no_wrap(x, t1, t2):
    """Plain-loop translation; entries leaving the frame are dropped."""
    out = np.zeros_like(x)
    n1, n2 = x.shape
    for a in range(n1):
        for b in range(n2):
            if 0 <= a + t1 < n1 and 0 <= b + t2 < n2:
                out[a + t1, b + t2] = x[a, b]
    return out


def golden_min(f, lo, hi, tol=1e-13, maxit=200):
    g = (math.sqrt(5) - 1) / 2
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(maxit):
        if hi - lo < tol:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    x = (lo + hi) / 2
    return x, f(x)


def pa_mse_search(a, b, grid=720):
    """Direct minimization of ||a - eta e^{i theta} b||^2 over theta and eta >= 0.

    A 720-point theta grid locates the basin, then golden-section search
    refines theta; eta is minimized by golden-section for each theta.
    """
    nb = np.sqrt(np.sum(np.abs(b) ** 2))
    eta_hi = 2 * np.sqrt(np.sum(np.abs(a) ** 2)) / nb + 1.0

    def inner(theta):
        rot = b * np.exp(1j * theta)
        return golden_min(lambda eta: float(np.sum(np.abs(a - eta * rot) ** 2)), 0.0, eta_hi)[1]

    thetas = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    vals = [inner(t) for t in thetas]
    i = int(np.argmin(vals))
    step = 2 * np.pi / grid
    _, best = golden_min(inner, thetas[i] - step, thetas[i] + step, tol=1e-12)
    return min(best, vals[i])


def sa_mse_enumerate(a, b):
    """Exhaustive flip x translation search with explicit loops and the PA closed form."""
    best = np.inf
    nb_full = np.sum(np.abs(b) ** 2)
    na = np.sum(np.abs(a) ** 2)
    if nb_full == 0:
        return na
    n1, n2 = a.shape
    for flip in (False, True):
        bf = np.conj(b[::-1, ::-1]) if flip else b
        rows = [i for i in range(n1) if np.any(bf[i] != 0)]
        cols = [j for j in range(n2) if np.any(bf[:, j] != 0)]
        for t1 in range(-rows[0], n1 - rows[-1]):
            for t2 in range(-cols[0], n2 - cols[-1]):
                bs = shift_no_wrap(bf, t1, t2)
                ip = np.sum(np.conj(a) * bs)
                best = min(best, na - abs(ip) ** 2 / nb_full)
    return max(best, 0.0)


def numeric_grad(f, params, h=1e-5):
    """Central finite differences for every entry of every array in ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            fp = f()
            p[idx] = old - h
            fm = f()
            p[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads
