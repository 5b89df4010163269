"""Controllers for time-varying linear systems.

LQR gain computation, disturbance-feedback control with projected gradient
updates (GPC), and a meta-controller that runs many base-controller copies
as experts and follows one of them with low switching.
"""

import numpy as np

from .oco import ContractViolation, DecisionSet, rescale_to_unit
from .experts import ExpertPool, SparseExpertPool
from .lds import recover_disturbance


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

class QuadraticCost:
    """c(x, u) = x'Qx + u'Ru (defaults Q = I, R = I)."""

    def __init__(self, Q=None, R=None):
        self.Q = Q
        self.R = R

    def value(self, x, u):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        qx = x if self.Q is None else self.Q @ x
        ru = u if self.R is None else self.R @ u
        return float(x @ qx + u @ ru)

    def grad(self, x, u):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        gx = 2 * (x if self.Q is None else self.Q @ x)
        gu = 2 * (u if self.R is None else self.R @ u)
        return gx, gu


# ---------------------------------------------------------------------------
# LQR
# ---------------------------------------------------------------------------

class RiccatiError(RuntimeError):
    def __init__(self, iterations):
        super().__init__(f"Riccati iteration did not converge in {iterations} steps")
        self.iterations = iterations


def lqr_gain(A, B, Q=None, R=None, tol=1e-10, max_iter=10_000):
    """Infinite-horizon discrete LQR gain K with u = K x.

    Iterates the Riccati fixed point P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA
    until the update is below ``tol`` in Frobenius norm.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = A.shape[0], B.shape[1]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(m) if R is None else np.asarray(R, dtype=float)
    P = Q.copy()
    for _ in range(max_iter):
        G = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P_new = Q + A.T @ P @ A - A.T @ P @ B @ G
        if np.linalg.norm(P_new - P) <= tol:
            P = P_new
            break
        P = P_new
    else:
        raise RiccatiError(max_iter)
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return K


class StabilizerCache:
    """LQR gains memoized on the (A, B) pair."""

    def __init__(self, Q=None, R=None):
        self.Q = Q
        self.R = R
        self._cache = {}

    def gain(self, A, B):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        key = (A.tobytes(), B.tobytes(), A.shape, B.shape)
        if key not in self._cache:
            self._cache[key] = lqr_gain(A, B, self.Q, self.R)
        return self._cache[key]


# ---------------------------------------------------------------------------
# Disturbance-feedback parameterization
# ---------------------------------------------------------------------------

class DacParams:
    """History-length-H stack of feedback matrices with a norm budget."""

    def __init__(self, history, d_u, d_x, gamma):
        self.history = int(history)
        self.d_u = int(d_u)
        self.d_x = int(d_x)
        self.gamma = float(gamma)
        self.set = DecisionSet.block_budget((d_u, d_x), history, gamma)
        self.flat = np.zeros(history * d_u * d_x)

    def blocks(self):
        return self.flat.reshape(self.history, self.d_u, self.d_x)

    def project(self):
        self.flat = self.set.project(self.flat)


def _clip_norm(w, bound):
    """Rescale a vector into the norm ball of the given bound."""
    n = np.linalg.norm(w)
    if bound is not None and n > bound:
        return w * (bound / n)
    return w


def dac_action(K, x, blocks, w_history):
    """u = K x + sum_i blocks[i-1] @ w_{t-i}.

    ``w_history`` lists w_{t-1}, ..., w_{t-H} newest first (zero-padded).
    """
    u = np.asarray(K, dtype=float) @ np.atleast_1d(np.asarray(x, dtype=float))
    for i, M in enumerate(blocks):
        u = u + M @ np.atleast_1d(np.asarray(w_history[i], dtype=float))
    return u


def disturbance_feedback_term(blocks, w_history):
    """The learned component sum_i blocks[i-1] @ w_{t-i} alone."""
    H = len(blocks)
    u = np.zeros(blocks[0].shape[0])
    for i in range(H):
        u = u + blocks[i] @ np.atleast_1d(np.asarray(w_history[i], dtype=float))
    return u


def proxy_state(blocks, mats, ws):
    """State reached from zero H+1 steps back under the feedback policy.

    ``mats`` lists (A, B, K) for times tau = t-H .. t (oldest first) and
    ``ws`` lists disturbances for times t-2H .. t (oldest first, zero-padded);
    returns the predicted state at time t+1.  The result is linear in the
    feedback blocks because the stabilizer folds into the closed-loop matrix.
    """
    H = len(blocks)
    if len(mats) != H + 1 or len(ws) != 2 * H + 1:
        raise ContractViolation("window lengths must be H+1 matrices, 2H+1 disturbances")
    d_x = np.asarray(mats[0][0]).shape[0]
    closed = [np.asarray(A) + np.asarray(B) @ np.asarray(K) for A, B, K in mats]
    xhat = np.zeros(d_x)
    phi = np.eye(d_x)  # product of closed-loop mats for i = tau+1 .. t
    for k in range(H, -1, -1):  # tau = t-H+k, iterate newest to oldest
        A, B, K = mats[k]
        inner = np.asarray(ws[k + H], dtype=float).copy()
        for j in range(1, H + 1):
            inner = inner + np.asarray(B) @ (blocks[j - 1] @ ws[k + H - j])
        xhat = xhat + phi @ inner
        phi = phi @ closed[k]
    return xhat


def proxy_loss(blocks, window, K_now, cost):
    """Functional form of :meth:`ProxyWindow.loss`: (value, gradient)."""
    return window.loss(blocks, K_now, cost)


class ProxyWindow:
    """Rolling window of system matrices and disturbances for proxy losses.

    Holds (A, B, K) for the last H rounds and w for the last 2H rounds,
    zero-padded during warm-up.  Provides the surrogate loss of a feedback
    parameter (value and gradient) and of a constant excess action, both
    measured at the upcoming round.
    """

    def __init__(self, history, d_x, d_u):
        self.H = int(history)
        self.d_x = int(d_x)
        self.d_u = int(d_u)
        eye = np.eye(d_x)
        self.mats = [(eye, np.zeros((d_x, d_u)), np.zeros((d_u, d_x)))
                     for _ in range(self.H)]
        self.ws = [np.zeros(d_x) for _ in range(2 * self.H)]

    def push(self, A, B, K, w):
        """Append round-t data after the round completes."""
        self.mats = self.mats[1:] + [(np.asarray(A, dtype=float),
                                      np.asarray(B, dtype=float),
                                      np.asarray(K, dtype=float))]
        self.ws = self.ws[1:] + [np.atleast_1d(np.asarray(w, dtype=float))]

    def recent(self, H):
        """Disturbances w_{t-1}, ..., w_{t-H}, newest first."""
        return [self.ws[-j] for j in range(1, H + 1)]

    def _phis(self):
        """Suffix closed-loop products for tau = t-H .. t-1 (index k):
        phis[k] = product of (A_i + B_i K_i) for i = tau+1 .. t-1."""
        closed = [A + B @ K for A, B, K in self.mats]
        phis = [None] * self.H
        phi = np.eye(self.d_x)
        for k in range(self.H - 1, -1, -1):
            phis[k] = phi
            phi = phi @ closed[k]
        return phis

    # -- proxy loss in the feedback parameter ------------------------------

    def loss(self, blocks, K_now, cost, with_grad=True):
        """Value (and gradient) of c(xhat_t(M), u_t(M)).

        The window holds data for times t-H .. t-1 (matrices) and
        t-2H .. t-1 (disturbances); ``K_now`` is the stabilizer for the
        upcoming round t.  The proxy state zeroes the state at t-H and
        replays the closed loop, so both the state and the action are
        affine in the blocks.
        """
        H = self.H
        phis = self._phis()
        xhat = np.zeros(self.d_x)
        for k in range(H):  # tau = t-H+k, disturbance index H+k
            A, B, K = self.mats[k]
            inner = self.ws[H + k].copy()
            for j in range(1, H + 1):
                inner = inner + B @ (blocks[j - 1] @ self.ws[H + k - j])
            xhat = xhat + phis[k] @ inner
        recent = self.recent(H)
        u = K_now @ xhat + disturbance_feedback_term(blocks, recent)
        value = cost.value(xhat, u)
        if not with_grad:
            return value, None
        gx, gu = cost.grad(xhat, u)
        # d xhat / d M_j = sum_k phis[k] B_k M_j w_{tau-j}; the chain rule
        # gives per-block outer products of a pulled-back state gradient
        # with the matching disturbances, plus the direct action term.
        pulled = gx + K_now.T @ gu
        grad = np.zeros((H, self.d_u, self.d_x))
        for k in range(H):
            A, B, K = self.mats[k]
            v = B.T @ (phis[k].T @ pulled)
            for j in range(1, H + 1):
                grad[j - 1] += np.outer(v, self.ws[H + k - j])
        for j in range(1, H + 1):
            grad[j - 1] += np.outer(gu, recent[j - 1])
        return value, grad

    # -- surrogate over a constant excess action ---------------------------

    def action_surrogate_coeffs(self, K_now):
        """Affine map of the proxy state in a constant excess action v:
        xhat_t(v) = S v + b.  Returns (S, b)."""
        phis = self._phis()
        S = np.zeros((self.d_x, self.d_u))
        b = np.zeros(self.d_x)
        for k in range(self.H):
            A, B, K = self.mats[k]
            S = S + phis[k] @ B
            b = b + phis[k] @ self.ws[self.H + k]
        return S, b

    def action_surrogate(self, v, K_now, cost):
        """c(xhat_t(v), K_now xhat_t(v) + v) for a constant excess action."""
        S, b = self.action_surrogate_coeffs(K_now)
        xhat = S @ np.atleast_1d(np.asarray(v, dtype=float)) + b
        u = K_now @ xhat + v
        return cost.value(xhat, u)


# ---------------------------------------------------------------------------
# Controllers
# ---------------------------------------------------------------------------

class BaseController:
    """Uniform act/observe driver contract."""

    def act(self, t):
        raise NotImplementedError

    def observe(self, x_next, A, B, cost):
        raise NotImplementedError


class LqrController(BaseController):
    """Linear feedback with the gain computed once at the start."""

    def __init__(self, system, Q=None, R=None, x0=None):
        A1, B1 = system.matrices(1)
        self.K = lqr_gain(A1, B1, Q, R)
        self.x = np.zeros(system.d_x) if x0 is None else np.asarray(x0, float)

    def act(self, t):
        return self.K @ self.x

    def observe(self, x_next, A, B, cost):
        self.x = np.atleast_1d(np.asarray(x_next, dtype=float))


class GpcController(BaseController):
    """Stabilizing feedback plus learned disturbance feedback.

    Each round plays u = K_t x + sum_i M[i] w_{t-i}, recovers the realized
    disturbance from the observed next state, and takes a projected gradient
    step on the proxy loss of holding M fixed over the recent window.
    """

    def __init__(self, system, history=10, lr=0.01, gamma=5.0, x0=None,
                 lr_decay=None, stabilizers=None, start=1, policy=None,
                 track_system=True):
        self.system = system
        # optional nonlinear stabilizing policy replacing K x in the action;
        # the proxy loss keeps using the local gains
        self.policy = policy
        # when not tracking, the controller freezes the matrices of its
        # start round and treats later model drift as disturbance
        self.track_system = bool(track_system)
        self._frozen = None
        self.H = int(history)
        self.lr = float(lr)
        self.lr_decay = lr_decay
        self.stabilizers = stabilizers if stabilizers is not None else StabilizerCache()
        self.params = DacParams(self.H, system.d_u, system.d_x, gamma)
        self.window = ProxyWindow(self.H, system.d_x, system.d_u)
        self.x = np.zeros(system.d_x) if x0 is None else np.asarray(x0, float)
        self.start = int(start)
        self.steps = 0
        self.last_u = np.zeros(system.d_u)

    def _frozen_model(self):
        if self._frozen is None:
            A, B = self.system.matrices(self.start)
            self._frozen = (np.asarray(A, float), np.asarray(B, float),
                            self.stabilizers.gain(A, B))
        return self._frozen

    def current_gain(self, t):
        if not self.track_system and t >= self.start:
            return self._frozen_model()[2]
        A, B = self.system.matrices(t)
        return self.stabilizers.gain(A, B)

    def act(self, t):
        K = self.current_gain(t)
        base = K @ self.x if self.policy is None else \
            np.atleast_1d(np.asarray(self.policy(self.x), float))
        if t < self.start:
            u = base
        else:
            u = base + disturbance_feedback_term(self.params.blocks(),
                                                 self.window.recent(self.H))
        self.last_u = u
        return u

    def observe(self, x_next, A, B, cost):
        x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
        if not self.track_system and self.steps + 1 >= self.start:
            A, B, K = self._frozen_model()
        else:
            K = self.stabilizers.gain(A, B)
        w = recover_disturbance(x_next, A, B, self.x, self.last_u)
        w = _clip_norm(w, getattr(self.system, "noise_bound", 1.0))
        self.steps += 1
        # gradient step uses the window up to t-1 plus this round's cost
        if self.steps >= self.start:
            _, grad = self.window.loss(self.params.blocks(), K, cost)
            eta = self.lr
            if self.lr_decay == "sqrt":
                eta = self.lr / np.sqrt(self.steps - self.start + 1)
            self.params.flat = self.params.set.project(
                self.params.flat - eta * grad.reshape(-1))
        self.window.push(A, B, K, w)
        self.x = x_next


class _Expert:
    """One base-controller copy inside the meta-controller: its own feedback
    parameter and simulated state, sharing the meta window of (A, B, K, w)."""

    def __init__(self, params, x, birth):
        self.params = params
        self.x = x.copy()
        self.birth = birth


class MetaController(BaseController):
    """Meta-controller following one of many staggered base controllers.

    Copies of the base controller are born over time; each simulates its own
    state against the shared disturbances.  A multiplicative-weights pool
    with shrinking scores each copy by the surrogate proxy cost of its
    excess action and picks which copy's action to play.  Copies not yet
    born (or expired) play the pure stabilizing action; the sparse pool
    represents them collectively, so per-round work is O(active experts).
    """

    def __init__(self, system, horizon, rng, eta=0.05, sigma=0.01,
                 history=10, lr=0.01, gamma=5.0, x0=None, lr_decay=None,
                 selection="sample", birth_stride=1, lifetime_pad=0,
                 single_expert=False, stabilizers=None,
                 action_state="simulated", policy=None):
        if action_state not in ("simulated", "observed"):
            raise ContractViolation("action_state must be 'simulated' or 'observed'")
        self.policy = policy
        self.system = system
        self.T = int(horizon)
        self.H = int(history)
        self.lr = float(lr)
        self.lr_decay = lr_decay
        self.gamma = float(gamma)
        self.stabilizers = stabilizers if stabilizers is not None else StabilizerCache()
        if single_expert:
            birth_stride = self.T + 1
            lifetime_pad = 4 * self.T
        self.pool = SparseExpertPool(self.T, eta, sigma, rng,
                                     selection=selection,
                                     lifetime_pad=lifetime_pad,
                                     birth_stride=birth_stride)
        self.action_state = action_state
        x_init = np.zeros(system.d_x) if x0 is None else np.asarray(x0, float)
        self.x = x_init.copy()
        self.fallback_x = x_init.copy()
        self.experts = {1: _Expert(DacParams(self.H, system.d_u, system.d_x,
                                             gamma), x_init, 1)}
        self.window = ProxyWindow(self.H, system.d_x, system.d_u)
        self.t = 0
        self.last_u = np.zeros(system.d_u)
        self._last_actions = {}
        self.chosen = []

    def _gain(self, t):
        A, B = self.system.matrices(t)
        return self.stabilizers.gain(A, B)

    def _expert_excess(self, e):
        return disturbance_feedback_term(e.params.blocks(),
                                         self.window.recent(self.H))

    def act(self, t):
        self.t = t
        K = self._gain(t)
        idx = self.pool.select()
        self.chosen.append(idx)
        def stabilizing(x):
            if self.policy is None:
                return K @ x
            return np.atleast_1d(np.asarray(self.policy(x), float))

        self._last_actions = {}
        for i, e in self.experts.items():
            base = self.x if self.action_state == "observed" else e.x
            self._last_actions[i] = stabilizing(base) + self._expert_excess(e)
        fb_base = self.x if self.action_state == "observed" else self.fallback_x
        fallback_u = stabilizing(fb_base)
        u = fallback_u if idx == 0 else self._last_actions.get(idx, fallback_u)
        self.last_u = u
        return u

    def observe(self, x_next, A, B, cost):
        x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
        w = recover_disturbance(x_next, A, B, self.x, self.last_u)
        w_window = _clip_norm(w, getattr(self.system, "noise_bound", 1.0))
        K = self.stabilizers.gain(A, B)
        # score every expert by the surrogate cost of its excess action
        S, b = self.window.action_surrogate_coeffs(K)

        def surrogate(v):
            xh = S @ v + b
            return rescale_to_unit(cost.value(xh, K @ xh + v))

        zero_v = np.zeros(self.system.d_u)
        fallback_value = surrogate(zero_v)
        values = {i: surrogate(self._expert_excess(e))
                  for i, e in self.experts.items()}
        missing = set(self.pool.active) - set(values)
        for i in missing:
            values[i] = fallback_value
        self.pool.update(values, fallback_value)

        # per-expert parameter updates against the pre-push window
        for i, e in self.experts.items():
            _, grad = self.window.loss(e.params.blocks(), K, cost)
            eta = self.lr
            if self.lr_decay == "sqrt":
                eta = self.lr / np.sqrt(self.t - e.birth + 1)
            e.params.flat = e.params.set.project(
                e.params.flat - eta * grad.reshape(-1))

        # advance every simulated trajectory with the shared disturbance;
        # in observed mode all copies ride the real state instead
        if self.action_state == "simulated":
            for i, e in self.experts.items():
                e.x = A @ e.x + B @ self._last_actions[i] + w
            fb_u = K @ self.fallback_x if self.policy is None else \
                np.atleast_1d(np.asarray(self.policy(self.fallback_x), float))
            self.fallback_x = A @ self.fallback_x + B @ fb_u + w
        else:
            for e in self.experts.values():
                e.x = x_next
            self.fallback_x = x_next.copy()
        self.x = x_next
        self.window.push(A, B, K, w_window)

        # birth / death bookkeeping follows the pool's active set
        alive = set(self.pool.active)
        for i in list(self.experts):
            if i not in alive:
                del self.experts[i]
        for i in alive:
            if i not in self.experts:
                self.experts[i] = _Expert(
                    DacParams(self.H, self.system.d_u, self.system.d_x,
                              self.gamma),
                    self.fallback_x, i)


def memory_epsilon(system, stabilizer_gains, horizon, history, ws,
                   cost, excess_actions=None):
    """Largest cost gap between the true state and its H-step proxy.

    Rolls x_{t+1} = (A_t + B_t K_t) x_t + B_t v_t + w_t, then for each t
    recomputes the state with x_{t-H} zeroed, and reports the max cost gap
    |c(x_t, u_t) - c(xhat_t, u_t)| over t > H.
    """
    d_x = system.d_x
    d_u = system.d_u
    xs = [np.ones(d_x)]  # nonzero start so the truncation has an effect
    vs = []
    for t in range(1, horizon + 1):
        A, B = system.matrices(t)
        K = stabilizer_gains(t)
        v = np.zeros(d_u) if excess_actions is None else excess_actions[t - 1]
        vs.append(v)
        x = xs[-1]
        xs.append((A + B @ K) @ x + B @ v + ws[t - 1])
    eps = 0.0
    for t in range(history + 1, horizon + 1):
        xhat = np.zeros(d_x)
        for tau in range(t - history, t):
            A, B = system.matrices(tau)
            K = stabilizer_gains(tau)
            xhat = (A + B @ K) @ xhat + B @ vs[tau - 1] + ws[tau - 1]
        K_t = stabilizer_gains(t)
        u = K_t @ xs[t - 1] + vs[t - 1]
        gap = abs(cost.value(xs[t - 1], u) - cost.value(xhat, u))
        eps = max(eps, gap)
    return eps
