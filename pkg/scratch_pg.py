"""Prototype of the exact PG(1,c) sampler; throwaway validation script."""
import numpy as np
from scipy.special import log_ndtr, logsumexp

TRUNC = 0.64
_HALF_PI_SQ = np.pi ** 2 / 8.0


def _log_igauss_cdf(t, z):
    # CDF at t of inverse-Gaussian(mu=1/z, lambda=1); z >= 0, z=0 is the Levy limit.
    rt = np.sqrt(t)
    a = log_ndtr((t * z - 1.0) / rt)
    b = 2.0 * z + log_ndtr(-(t * z + 1.0) / rt)
    return logsumexp(np.stack([a, b]), axis=0)


def _series_coef(n, x):
    # a_n(x), piecewise around TRUNC
    x = np.asarray(x)
    half = n + 0.5
    out = np.where(
        x > TRUNC,
        np.pi * half * np.exp(-(half ** 2) * np.pi ** 2 * x / 2.0),
        (2.0 / np.pi / np.maximum(x, 1e-300)) ** 1.5 * np.pi * half * np.exp(-2.0 * half ** 2 / np.maximum(x, 1e-300)),
    )
    return out


def _rtigauss(z, rng, cap=10000):
    """Draw IG(1/z, 1) truncated to (0, TRUNC], vectorized; z >= 0."""
    z = np.asarray(z, dtype=float)
    n = z.size
    out = np.empty(n)
    small = z < 1.0 / TRUNC  # mu = 1/z > TRUNC: tilted-Levy rejection
    # branch A: z < 1/t
    idx = np.flatnonzero(small)
    it = 0
    while idx.size:
        it += 1
        if it > cap:
            raise RuntimeError("tilted-Levy loop exceeded cap")
        m = idx.size
        e1 = rng.standard_exponential(m)
        e2 = rng.standard_exponential(m)
        ok = e1 * e1 <= 2.0 * e2 / TRUNC
        x = TRUNC / (1.0 + TRUNC * e1) ** 2
        acc = ok & (rng.random(m) <= np.exp(-0.5 * z[idx] ** 2 * x))
        out[idx[acc]] = x[acc]
        idx = idx[~acc]
    # branch B: mu <= TRUNC, vanilla IG until <= TRUNC
    idx = np.flatnonzero(~small)
    it = 0
    while idx.size:
        it += 1
        if it > cap:
            raise RuntimeError("IG loop exceeded cap")
        m = idx.size
        mu = 1.0 / z[idx]
        y = rng.standard_normal(m) ** 2
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * np.sqrt(4.0 * mu * y + (mu * y) ** 2)
        flip = rng.random(m) > mu / (mu + x)
        x = np.where(flip, mu * mu / np.maximum(x, 1e-300), x)
        acc = x <= TRUNC
        out[idx[acc]] = x[acc]
        idx = idx[~acc]
    return out


def sample_pg1_batch(c, rng, cap=10000):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    z = 0.5 * np.abs(c)
    K = _HALF_PI_SQ + 0.5 * z * z
    logp = np.log(np.pi / (2.0 * K)) - K * TRUNC
    logq = np.log(2.0) - z + _log_igauss_cdf(TRUNC, z)
    p_tail = np.exp(logp - np.logaddexp(logp, logq))

    out = np.empty_like(z)
    idx = np.arange(z.size)
    outer = 0
    while idx.size:
        outer += 1
        if outer > cap:
            raise RuntimeError("PG acceptance loop exceeded cap")
        m = idx.size
        take_tail = rng.random(m) < p_tail[idx]
        x = np.empty(m)
        if take_tail.any():
            j = np.flatnonzero(take_tail)
            x[j] = TRUNC + rng.standard_exponential(j.size) / K[idx[j]]
        if (~take_tail).any():
            j = np.flatnonzero(~take_tail)
            x[j] = _rtigauss(z[idx[j]], rng, cap)
        # alternating-series accept/reject
        s = _series_coef(0, x)
        y = rng.random(m) * s
        undecided = np.ones(m, dtype=bool)
        accepted = np.zeros(m, dtype=bool)
        n_term = 0
        while undecided.any():
            n_term += 1
            if n_term > cap:
                raise RuntimeError("series loop exceeded cap")
            a = _series_coef(n_term, x)
            if n_term % 2 == 1:
                s = np.where(undecided, s - a, s)
                newly = undecided & (y <= s)
                accepted |= newly
                undecided &= ~newly
            else:
                s = np.where(undecided, s + a, s)
                newly = undecided & (y > s)
                undecided &= ~newly
        out[idx[accepted]] = x[accepted]
        idx = idx[~accepted]
    return out / 4.0


def pg_mean(c):
    c = abs(c)
    if c < 1e-12:
        return 0.25
    return np.tanh(c / 2.0) / (2.0 * c)


if __name__ == "__main__":
    import time
    rng = np.random.default_rng(7)
    for c in [0.0, 0.5, 1.0, 2.0, 5.0, -5.0, 20.0]:
        n = 10 ** 6
        t0 = time.time()
        w = sample_pg1_batch(np.full(n, c), rng)
        dt = time.time() - t0
        m, se = w.mean(), w.std() / np.sqrt(n)
        exact = pg_mean(c)
        print(f"c={c:6.2f} mean={m:.6f} exact={exact:.6f} dev/se={(m-exact)/se:+.2f} "
              f"min={w.min():.3g} [{dt:.2f}s]")
    # variance sanity at c=0: var of PG(1,0) = 1/24? E[w^2]-1/16
    w = sample_pg1_batch(np.zeros(10 ** 6), rng)
    print("var at c=0:", w.var(), "(theory 1/24 =", 1 / 24, ")")
    # symmetry c=+-5
    from scipy.stats import ks_2samp
    a = sample_pg1_batch(np.full(10 ** 5, 5.0), rng)
    b = sample_pg1_batch(np.full(10 ** 5, -5.0), rng)
    print("KS +/-5:", ks_2samp(a, b))
