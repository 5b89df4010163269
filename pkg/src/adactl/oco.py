"""Online convex optimization primitives: decision sets, losses with
memory, projected online gradient descent, and trajectory metrics."""

import numpy as np


class ContractViolation(ValueError):
    """Raised when an operation is called outside its contract."""


# ---------------------------------------------------------------------------
# Decision sets
# ---------------------------------------------------------------------------

class DecisionSet:
    """Convex constraint set with a projection operator and a diameter.

    Three kinds are supported:
      * ``interval``   -- a box [lo, hi] per coordinate,
      * ``ball``       -- Euclidean ball of given center and radius,
      * ``block_budget`` -- stacked matrix blocks M[1..H] constrained by
        sum_i ||M[i]||_F <= gamma (points are flat vectors).
    """

    def __init__(self, kind, center, diameter, **params):
        self.kind = kind
        self.center = np.asarray(center, dtype=float)
        self.diameter = float(diameter)
        self.params = params
        if not self.diameter > 0:
            raise ContractViolation("diameter must be positive")

    @classmethod
    def interval(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if np.any(hi <= lo):
            raise ContractViolation("interval requires lo < hi")
        return cls("interval", (lo + hi) / 2, float(np.linalg.norm(hi - lo)),
                   lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius):
        if radius <= 0:
            raise ContractViolation("radius must be positive")
        return cls("ball", center, 2.0 * radius, radius=float(radius))

    @classmethod
    def block_budget(cls, block_shape, n_blocks, gamma):
        """Set of stacked matrices with sum of block Frobenius norms <= gamma."""
        if gamma <= 0:
            raise ContractViolation("gamma must be positive")
        dim = n_blocks * block_shape[0] * block_shape[1]
        return cls("block_budget", np.zeros(dim), 2.0 * gamma,
                   block_shape=tuple(block_shape), n_blocks=int(n_blocks),
                   gamma=float(gamma))

    @property
    def dim(self):
        return self.center.size

    def _check_dim(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.shape != self.center.shape:
            raise ContractViolation(
                f"dimension mismatch: expected {self.center.shape}, got {p.shape}")
        return p

    def _block_norms(self, p):
        bs = self.params["block_shape"]
        blocks = p.reshape(self.params["n_blocks"], bs[0] * bs[1])
        return np.linalg.norm(blocks, axis=1)

    def project(self, p):
        p = self._check_dim(p)
        if not np.all(np.isfinite(p)):
            raise ContractViolation("cannot project a non-finite point")
        if self.kind == "interval":
            return np.clip(p, self.params["lo"], self.params["hi"])
        if self.kind == "ball":
            d = p - self.center
            n = np.linalg.norm(d)
            r = self.params["radius"]
            if n <= r:
                return p.copy()
            return self.center + d * (r / n)
        # block_budget: project the vector of block Frobenius norms onto the
        # L1 ball of radius gamma and rescale each block accordingly.  This is
        # the exact Euclidean projection onto the group-L1 ball.
        norms = self._block_norms(p)
        gamma = self.params["gamma"]
        if norms.sum() <= gamma:
            return p.copy()
        shrunk = _project_l1_nonneg(norms, gamma)
        scale = np.where(norms > 0, shrunk / np.maximum(norms, 1e-300), 0.0)
        bs = self.params["block_shape"]
        blocks = p.reshape(self.params["n_blocks"], bs[0] * bs[1])
        return (blocks * scale[:, None]).reshape(-1)

    def contains(self, p, tol=1e-12):
        p = self._check_dim(p)
        if self.kind == "interval":
            return bool(np.all(p >= self.params["lo"] - tol)
                        and np.all(p <= self.params["hi"] + tol))
        if self.kind == "ball":
            return np.linalg.norm(p - self.center) <= self.params["radius"] + tol
        return self._block_norms(p).sum() <= self.params["gamma"] + tol


def _project_l1_nonneg(v, radius):
    """Euclidean projection of a nonnegative vector onto the simplex-scaled
    L1 ball {x >= 0, sum x <= radius} (soft-thresholding)."""
    if v.sum() <= radius:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    cond = u - (css - radius) / k > 0
    rho = np.nonzero(cond)[0][-1]
    tau = (css[rho] - radius) / (rho + 1)
    return np.maximum(v - tau, 0.0)


def project(dset, p):
    """Functional form of :meth:`DecisionSet.project`."""
    return dset.project(p)


# ---------------------------------------------------------------------------
# Projected OGD
# ---------------------------------------------------------------------------

class StronglyConvexSchedule:
    """Stepsizes eta_t = 1 / (alpha * t) for alpha-strongly-convex losses."""

    def __init__(self, alpha):
        if alpha <= 0:
            raise ContractViolation("strongly-convex schedule needs alpha > 0")
        self.alpha = float(alpha)

    def eta(self, t):
        return 1.0 / (self.alpha * t)


class ConvexSchedule:
    """Stepsizes eta_t = D / (G * sqrt(t)) for general convex losses."""

    def __init__(self, diameter, grad_bound):
        self.diameter = float(diameter)
        self.grad_bound = float(grad_bound)

    def eta(self, t):
        return self.diameter / (self.grad_bound * np.sqrt(t))


def ogd_step(dset, z, grad, schedule, t):
    """One projected gradient step: project(z - eta_t * grad)."""
    if t < 1:
        raise ContractViolation("round index must be >= 1")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    grad = np.atleast_1d(np.asarray(grad, dtype=float))
    if z.shape != grad.shape:
        raise ContractViolation("point/gradient dimension mismatch")
    return dset.project(z - schedule.eta(t) * grad)


class OgdLearner:
    """Stateful projected-OGD learner over a decision set."""

    def __init__(self, dset, schedule, z0=None):
        self.dset = dset
        self.schedule = schedule
        self.z = dset.project(dset.center if z0 is None else np.asarray(z0, float))
        self.t = 0

    def point(self):
        return self.z.copy()

    def step(self, grad):
        self.t += 1
        self.z = ogd_step(self.dset, self.z, grad, self.schedule, self.t)
        return self.z.copy()


# ---------------------------------------------------------------------------
# Losses with memory
# ---------------------------------------------------------------------------

class MemoryLoss:
    """A loss over the last H+1 decisions together with its surrogate.

    ``evaluate`` receives a sequence of H+1 points (oldest first) and returns
    a value in [0, 1].  ``surrogate(z)`` must equal evaluate(z, ..., z).
    """

    def __init__(self, memory, evaluate, surrogate, surrogate_grad,
                 lipschitz, grad_bound, strong_convexity=0.0):
        if memory < 0:
            raise ContractViolation("memory must be nonnegative")
        self.memory = int(memory)
        self.evaluate = evaluate
        self.surrogate = surrogate
        self.surrogate_grad = surrogate_grad
        self.lipschitz = float(lipschitz)
        self.grad_bound = float(grad_bound)
        self.strong_convexity = float(strong_convexity)

    def check_gradient(self, z, rel_tol=1e-6):
        """Compare surrogate_grad against central finite differences."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        g = np.atleast_1d(np.asarray(self.surrogate_grad(z), dtype=float))
        fd = finite_difference_gradient(self.surrogate, z)
        denom = max(1.0, np.linalg.norm(fd))
        return np.linalg.norm(g - fd) / denom <= rel_tol


def finite_difference_gradient(f, z, step=None):
    """Central-difference gradient with step 1e-6 * max(1, ||z||)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    h = step if step is not None else 1e-6 * max(1.0, np.linalg.norm(z))
    g = np.zeros_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def rescale_to_unit(raw_value):
    """Map a nonnegative raw cost into [0, 1) via c / (1 + c)."""
    return raw_value / (1.0 + raw_value)


def unit_to_raw(unit_value):
    """Invert :func:`rescale_to_unit`."""
    return unit_value / (1.0 - unit_value)


# ---------------------------------------------------------------------------
# Trajectories and metrics
# ---------------------------------------------------------------------------

class Trajectory:
    """Time-indexed sequence of decisions with recorded losses."""

    def __init__(self, points, memory_losses=None, surrogate_losses=None):
        self.points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
        self.memory_losses = None if memory_losses is None else list(memory_losses)
        self.surrogate_losses = None if surrogate_losses is None else list(surrogate_losses)
        for seq in (self.memory_losses, self.surrogate_losses):
            if seq is not None and len(seq) != len(self.points):
                raise ContractViolation("loss/point length mismatch")

    def __len__(self):
        return len(self.points)


def action_shift(traj):
    """Total movement sum_t ||z_{t+1} - z_t|| along a trajectory."""
    points = traj.points if isinstance(traj, Trajectory) else \
        [np.atleast_1d(np.asarray(p, float)) for p in traj]
    if len(points) == 0:
        raise ContractViolation("need at least one point")
    return float(sum(np.linalg.norm(points[i + 1] - points[i])
                     for i in range(len(points) - 1)))


def stability_gap(losses, traj, interval=None):
    """Cumulative gap sum_t |f_t(z_{t-H:t}) - f~_t(z_t)| over an interval.

    Decisions before the first round are taken equal to the first decision.
    ``losses`` is a sequence of MemoryLoss, one per round (1-indexed rounds).
    """
    points = traj.points if isinstance(traj, Trajectory) else \
        [np.atleast_1d(np.asarray(p, float)) for p in traj]
    T = len(points)
    r, s = (1, T) if interval is None else interval
    if not (1 <= r <= s <= T):
        raise ContractViolation("interval out of range")
    total = 0.0
    for t in range(r, s + 1):
        loss = losses[t - 1]
        H = loss.memory
        window = [points[max(i, 0)] for i in range(t - 1 - H, t)]  # z_{t-H..t}
        total += abs(loss.evaluate(window) - loss.surrogate(points[t - 1]))
    return float(total)
