"""Time-varying linear dynamical systems, benchmark generators,
disturbance sources, and sequential-stability checking."""

import numpy as np

from .oco import ContractViolation


class ConfigurationError(ValueError):
    """Unknown kind or invalid parameters in a system/noise description."""


# ---------------------------------------------------------------------------
# System dynamics
# ---------------------------------------------------------------------------

class LtvSystem:
    """x_{t+1} = A_t x_t + B_t u_t + w_t with a time-indexed matrix generator."""

    def __init__(self, d_x, d_u, matrices, noise_bound=1.0):
        """``matrices`` maps a round t >= 1 to the pair (A_t, B_t)."""
        self.d_x = int(d_x)
        self.d_u = int(d_u)
        self.matrices = matrices
        self.noise_bound = float(noise_bound)

    def step(self, x, u, w, t):
        A, B = self.matrices(t)
        return step(A, B, x, u, w)


def step(A, B, x, u, w):
    """One round of the affine state update."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if A.shape[1] != x.size or B.shape[1] != u.size or A.shape[0] != w.size:
        raise ContractViolation("dimension mismatch in state update")
    return A @ x + B @ u + w


def recover_disturbance(x_next, A, B, x, u):
    """Invert the state update for the disturbance term."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return (np.atleast_1d(np.asarray(x_next, dtype=float))
            - A @ np.atleast_1d(np.asarray(x, dtype=float))
            - B @ np.atleast_1d(np.asarray(u, dtype=float)))


def make_system(kind, T):
    """Benchmark LTV systems.

    'fixed'     -- double integrator, constant (A, B)
    'switching' -- one set of matrices for t <= T/2, another afterwards
    'drifting'  -- fixed A with B_t = [0; 2 + sin(2*pi*t/T)]
    """
    A_int = np.array([[1.0, 1.0], [0.0, 1.0]])
    if kind == "fixed":
        B = np.array([[0.0], [1.0]])
        return LtvSystem(2, 1, lambda t: (A_int, B))
    if kind == "switching":
        A1 = np.array([[1.0, 0.5], [0.0, 1.0]])
        B1 = np.array([[0.0], [1.2]])
        A2 = np.array([[1.0, 1.5], [0.0, 1.0]])
        B2 = np.array([[0.0], [0.9]])
        half = T // 2
        return LtvSystem(2, 1, lambda t: (A1, B1) if t <= half else (A2, B2))
    if kind == "drifting":
        def gen(t):
            return A_int, np.array([[0.0], [2.0 + np.sin(2 * np.pi * t / T)]])
        return LtvSystem(2, 1, gen)
    raise ConfigurationError(f"unknown system kind {kind!r}")


# ---------------------------------------------------------------------------
# Disturbance sources
# ---------------------------------------------------------------------------

class DisturbanceSource:
    """Seeded disturbance generator with a hard norm bound.

    Kinds:
      zero         -- all zeros
      gaussian     -- i.i.d. N(0, std^2) entries, vector renormalized to the
                      bound when it exceeds it (events counted)
      sinusoidal   -- entry i is sin((n*t + i) / (8*pi)), n the dimension
      alternating  -- equal segments cycling gaussian / sinusoidal
      shock        -- base source plus amplitude*sin(t / (2*pi)) on a window

    Gaussian draws are pregenerated per round index so every consumer of
    a source sees the same w_t regardless of query order.
    """

    def __init__(self, kind, dim, horizon, rng=None, std=0.3, bound=1.0,
                 segments=5, window=None, amplitude=0.3, base=None):
        self.kind = kind
        self.dim = int(dim)
        self.horizon = int(horizon)
        self.bound = float(bound)
        self.std = float(std)
        self.segments = int(segments)
        self.amplitude = float(amplitude)
        self.truncations = 0
        if kind == "shock":
            self.window = window if window is not None else \
                (horizon // 3, 2 * horizon // 3)
            self.base = base if base is not None else \
                DisturbanceSource("zero", dim, horizon)
        elif kind in ("gaussian", "alternating"):
            if rng is None:
                raise ConfigurationError(f"{kind} noise needs an RNG")
            draws = rng.normal(0.0, self.std, size=(self.horizon, self.dim))
            norms = np.linalg.norm(draws, axis=1)
            over = norms > self.bound
            self.truncations = int(over.sum())
            draws[over] *= (self.bound / norms[over])[:, None]
            self._draws = draws
        elif kind not in ("zero", "sinusoidal"):
            raise ConfigurationError(f"unknown noise kind {kind!r}")

    def _sinusoid(self, t):
        i = np.arange(self.dim)
        return np.sin((self.dim * t + i) / (8 * np.pi))

    def at(self, t):
        """Disturbance for round t (1-indexed)."""
        if t < 1:
            raise ContractViolation("round index must be >= 1")
        if self.kind == "zero":
            return np.zeros(self.dim)
        if self.kind == "gaussian":
            return self._draws[t - 1].copy()
        if self.kind == "sinusoidal":
            return self._sinusoid(t)
        if self.kind == "alternating":
            seg_len = max(1, self.horizon // self.segments)
            seg = min((t - 1) // seg_len, self.segments - 1)
            if seg % 2 == 0:
                return self._draws[t - 1].copy()
            return self._sinusoid(t)
        # shock
        w = self.base.at(t)
        lo, hi = self.window
        if lo <= t <= hi:
            w = w + self.amplitude * np.sin(t / (2 * np.pi))
        n = np.linalg.norm(w)
        if n > self.bound:
            self.truncations += 1
            w = w * (self.bound / n)
        return w

    def sequence(self, T=None):
        T = self.horizon if T is None else T
        return np.array([self.at(t) for t in range(1, T + 1)])


def make_disturbance(kind, dim, horizon, rng=None, **params):
    return DisturbanceSource(kind, dim, horizon, rng=rng, **params)


# ---------------------------------------------------------------------------
# Sequential stability
# ---------------------------------------------------------------------------

def spectral_norm(M, iters=50, tol=1e-10):
    """Largest singular value by power iteration on M^T M."""
    M = np.asarray(M, dtype=float)
    v = np.ones(M.shape[1]) / np.sqrt(M.shape[1])
    s = 0.0
    for _ in range(iters):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v_new = w / nw
        s_new = np.sqrt(nw)
        if abs(s_new - s) <= tol * max(1.0, s_new):
            return s_new
        v, s = v_new, s_new
    return s


class StabilizerSequence:
    """Time-indexed feedback gains with contraction parameters."""

    def __init__(self, gains, kappa=None, delta=None):
        """``gains`` maps round t to the matrix K_t."""
        self.gains = gains
        self.kappa = kappa
        self.delta = delta

    def at(self, t):
        return self.gains(t)


def check_sequential_stability(system, stabilizer, horizon, kappa, delta,
                               length_cap=64, exhaustive=False):
    """Verify closed-loop interval products contract as kappa*(1-delta)^len.

    Checks all intervals [s, r] within the horizon of length up to
    ``length_cap`` (all lengths when ``exhaustive``).  Returns a report dict
    with the worst ratio of product norm to its allowed bound.
    """
    if horizon < 1:
        raise ContractViolation("horizon must be >= 1")
    cap = horizon if exhaustive else min(length_cap, horizon)
    closed = []
    for t in range(1, horizon + 1):
        A, B = system.matrices(t)
        closed.append(np.asarray(A) + np.asarray(B) @ np.asarray(stabilizer.at(t)))
    worst = {"ratio": 0.0, "interval": None}
    for start in range(horizon):
        prod = np.eye(closed[0].shape[0])
        for length in range(1, cap + 1):
            end = start + length - 1
            if end >= horizon:
                break
            prod = closed[end] @ prod
            allowed = kappa * (1 - delta) ** length
            ratio = spectral_norm(prod) / allowed
            if ratio > worst["ratio"]:
                worst = {"ratio": ratio, "interval": (start + 1, end + 1)}
    return {"pass": worst["ratio"] < 1.0,
            "worst_interval": worst["interval"],
            "worst_ratio": worst["ratio"],
            "kappa": kappa, "delta": delta}


def measure_contraction(system, stabilizer, horizon, length_cap=64):
    """Smallest (kappa, 1-delta) pair the closed loop satisfies empirically.

    Returns (kappa_hat, rho_hat) with rho_hat = max over interval lengths of
    the geometric-mean contraction per step.
    """
    closed = []
    for t in range(1, horizon + 1):
        A, B = system.matrices(t)
        closed.append(np.asarray(A) + np.asarray(B) @ np.asarray(stabilizer.at(t)))
    kappa_hat = 1.0
    rho_hat = 0.0
    cap = min(length_cap, horizon)
    for start in range(horizon):
        prod = np.eye(closed[0].shape[0])
        for length in range(1, cap + 1):
            end = start + length - 1
            if end >= horizon:
                break
            prod = closed[end] @ prod
            norm = spectral_norm(prod)
            kappa_hat = max(kappa_hat, norm)
            if length >= 8:
                rho_hat = max(rho_hat, norm ** (1.0 / length))
    return kappa_hat, rho_hat
