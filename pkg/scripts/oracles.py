"""Independent reference values frozen into the test-suite.

Uses numpy's default generator and scipy quadrature only; nothing from the
``kesten`` package is imported here.
"""
import numpy as np
from scipy import integrate, special, stats


def elog_chi2_1(draws=10**7, seed=20240601):
    z = np.random.default_rng(seed).standard_normal(draws)
    mc = np.mean(np.log(z * z))
    exact = -np.euler_gamma - np.log(2.0)
    return mc, exact


def elog_sgd_1d(eta):
    # E log|1 - eta a^2|, a ~ N(0, 1); integrand singular at a = 1/sqrt(eta)
    root = 1.0 / np.sqrt(eta)
    f = lambda a: np.log(abs(1.0 - eta * a * a)) * stats.norm.pdf(a)
    parts = [(0.0, root), (root, root + 10.0), (root + 10.0, np.inf)]
    return 2.0 * sum(integrate.quad(f, lo, hi, limit=200)[0] for lo, hi in parts)


def biased_walk_hitting(replicas=10**6, seed=7, p=0.6, target=2):
    rng = np.random.default_rng(seed)
    pos = np.zeros(replicas, dtype=np.int64)
    tau = np.zeros(replicas, dtype=np.int64)
    alive = np.ones(replicas, dtype=bool)
    t = 0
    while alive.any():
        t += 1
        idx = np.flatnonzero(alive)
        pos[idx] += np.where(rng.random(idx.size) < p, 1, -1)
        hit = idx[pos[idx] >= target]
        tau[hit] = t
        alive[hit] = False
    return tau.mean(), tau.std(ddof=1) / np.sqrt(replicas)


def staircase_slope(grid):
    taus = np.floor(np.log2(grid)) + 1
    return np.polyfit(np.log(grid), taus, 1)[0]


def sgd2_spectrum(eta=5.0):
    # a ~ N(0, I_2): |a|^2 ~ Exp(mean 2); A = I - eta a a^T is conjugation
    # invariant, so the top exponent is E log((|lam| + 1)/2) (mean of
    # log|D v| over uniform v) and the exponents sum to E log|lam|.
    def expect(g):
        root = 1.0 / eta
        f = lambda e: g(abs(1.0 - eta * e)) * 0.5 * np.exp(-e / 2.0)
        parts = [(0.0, root), (root, root + 50.0), (root + 50.0, np.inf)]
        return sum(integrate.quad(f, lo, hi, limit=200)[0] for lo, hi in parts)

    top = expect(lambda lam: np.log((lam + 1.0) / 2.0))
    total = expect(np.log)
    return top, total - top


def gaussian_tail_ratio(z, R, sd):
    return special.erfc(z * R / (sd * np.sqrt(2))) / special.erfc(R / (sd * np.sqrt(2)))


def explosive_min_ratio(R=1e5, replicas=10_000, seed=3, mu=0.2, sigma=0.1, max_steps=400):
    """Brute-force min over replicas of tau_R / log R for A = exp(N(mu, sigma^2)), B ~ N(0,1), x0 = 0."""
    rng = np.random.default_rng(seed)
    x = np.zeros(replicas)
    tau = np.full(replicas, -1)
    for n in range(1, max_steps + 1):
        x = np.exp(rng.normal(mu, sigma, replicas)) * x + rng.normal(size=replicas)
        hit = (tau < 0) & (np.abs(x) > R)
        tau[hit] = n
    assert (tau > 0).all()
    r = tau / np.log(R)
    return r.min(), np.quantile(r, 1e-3), r.mean()


if __name__ == "__main__":
    mc, exact = elog_chi2_1()
    print(f"E log Z^2: mc={mc:.6f} exact={exact:.6f}")
    for eta in (0.1, 1.0, 2.0, 10.0):
        print(f"E log|1 - {eta} a^2| = {elog_sgd_1d(eta):.6f}")
    m, se = biased_walk_hitting()
    print(f"biased walk hitting time: {m:.4f} +- {se:.4f} (formula 10)")
    for hi in (3, 6, 9, 12):
        grid = np.logspace(1, hi, 40)
        print(f"staircase slope 1e1..1e{hi}: {staircase_slope(grid):.5f} (1/log2={1/np.log(2):.5f})")
    top, bottom = sgd2_spectrum()
    print(f"SGD d=2 eta=5 exponents: top={top:.5f} bottom={bottom:.5f}")
    print(f"  inverse-product rate -bottom={-bottom:.5f} vs -top={-top:.5f}")
    print(f"Arch(1) alpha1=0.05 gamma={np.log(0.05) + exact:.5f}; alpha1=10 gamma={np.log(10) + exact:.5f}")
    print("gaussian tail ratio R=10 sd=sqrt(101):", [f"{gaussian_tail_ratio(z, 10, np.sqrt(101)):.3e}" for z in (2, 4, 8)])
    for sd in (3, 4, 5):
        lo, q, mean = explosive_min_ratio(seed=sd)
        print(f"explosive min tau/log R at 1e5 (seed {sd}): min={lo:.3f} q0.001={q:.3f} mean={mean:.3f}")
