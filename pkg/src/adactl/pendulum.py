"""Inverted pendulum environment, analytic linearization, and an iterative
LQR planner with regularization scheduling and backtracking line search.

The dynamics and cost follow the classic benchmark convention: the angle is
measured from the upright position and normalized to (-pi, pi], the update
is semi-implicit Euler, and both torque and angular speed are clamped.
"""

import numpy as np

from .oco import ContractViolation

DT = 0.05
GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
TORQUE_LIMIT = 2.0
SPEED_LIMIT = 8.0


def wrap_angle(theta):
    """Normalize an angle to (-pi, pi]."""
    out = (theta + np.pi) % (2 * np.pi) - np.pi
    if out == -np.pi:
        out = np.pi
    return out


def pendulum_step(state, torque, clamp=True):
    """One semi-implicit Euler step; state is (theta, theta_dot)."""
    theta, theta_dot = float(state[0]), float(state[1])
    u = float(np.clip(torque, -TORQUE_LIMIT, TORQUE_LIMIT)) if clamp else float(torque)
    accel = (3 * GRAVITY / (2 * LENGTH) * np.sin(theta)
             + 3.0 / (MASS * LENGTH ** 2) * u)
    new_dot = theta_dot + accel * DT
    if clamp:
        new_dot = float(np.clip(new_dot, -SPEED_LIMIT, SPEED_LIMIT))
    new_theta = wrap_angle(theta + new_dot * DT)
    return np.array([new_theta, new_dot])


def pendulum_cost(state, torque):
    """theta^2 + 0.1 theta_dot^2 + 0.001 torque^2 with theta normalized."""
    theta = wrap_angle(float(state[0]))
    return theta ** 2 + 0.1 * float(state[1]) ** 2 + 0.001 * float(torque) ** 2


def pendulum_energy(state):
    """Mechanical energy of the unforced rod (kinetic + potential)."""
    theta, theta_dot = float(state[0]), float(state[1])
    inertia = MASS * LENGTH ** 2 / 3.0
    return 0.5 * inertia * theta_dot ** 2 + (MASS * GRAVITY * LENGTH / 2.0) * np.cos(theta)


def linearize(state, torque):
    """Analytic Jacobians of the smooth (unclamped) update at (state, torque)."""
    theta = float(state[0])
    a = 3 * GRAVITY / (2 * LENGTH)
    b = 3.0 / (MASS * LENGTH ** 2)
    c = a * np.cos(theta)
    A = np.array([[1.0 + c * DT ** 2, DT],
                  [c * DT, 1.0]])
    B = np.array([[b * DT ** 2],
                  [b * DT]])
    return A, B


# ---------------------------------------------------------------------------
# Iterative LQR
# ---------------------------------------------------------------------------

class IlqrConfig:
    def __init__(self, iterations=10, tolerance=1e-16,
                 reg_init=1e-8, reg_min=1e-8, reg_max=1e8,
                 backtrack_steps=11):
        if tolerance <= 0:
            raise ContractViolation("tolerance must be positive")
        self.iterations = int(iterations)
        self.tolerance = float(tolerance)
        self.reg_init = float(reg_init)
        self.reg_min = float(reg_min)
        self.reg_max = float(reg_max)
        self.alphas = [2.0 ** -k for k in range(backtrack_steps)]


class IlqrDiverged(RuntimeError):
    def __init__(self, mu, iteration):
        super().__init__(f"regularization exceeded ceiling (mu={mu:g}) "
                         f"at iteration {iteration}")
        self.mu = mu
        self.iteration = iteration


class _Problem:
    """Dynamics/cost bundle with quadratic expansions for the planner."""

    def __init__(self, dynamics, cost, linearizer, cost_expansion, d_x, d_u,
                 clamp_u=None):
        self.dynamics = dynamics
        self.cost = cost
        self.linearizer = linearizer
        self.cost_expansion = cost_expansion
        self.d_x = d_x
        self.d_u = d_u
        self.clamp_u = clamp_u if clamp_u is not None else (lambda u: u)


def pendulum_problem():
    def expansion(x, u):
        th = wrap_angle(float(x[0]))
        lx = np.array([2 * th, 0.2 * float(x[1])])
        lu = np.array([0.002 * float(u[0])])
        lxx = np.diag([2.0, 0.2])
        luu = np.array([[0.002]])
        lux = np.zeros((1, 2))
        return lx, lu, lxx, luu, lux

    return _Problem(
        dynamics=lambda x, u: pendulum_step(x, u[0]),
        cost=lambda x, u: pendulum_cost(x, u[0]),
        linearizer=lambda x, u: linearize(x, u[0]),
        cost_expansion=expansion,
        d_x=2, d_u=1,
        clamp_u=lambda u: np.clip(u, -TORQUE_LIMIT, TORQUE_LIMIT))


def linear_quadratic_problem(A, B, Q, R):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)

    def expansion(x, u):
        return 2 * Q @ x, 2 * R @ u, 2 * Q, 2 * R, np.zeros((B.shape[1], A.shape[0]))

    return _Problem(
        dynamics=lambda x, u: A @ x + B @ u,
        cost=lambda x, u: float(x @ Q @ x + u @ R @ u),
        linearizer=lambda x, u: (A, B),
        cost_expansion=expansion,
        d_x=A.shape[0], d_u=B.shape[1])


def _rollout(problem, x0, us):
    xs = [np.asarray(x0, dtype=float)]
    total = 0.0
    for u in us:
        total += problem.cost(xs[-1], u)
        xs.append(problem.dynamics(xs[-1], u))
    # terminal cost: state part only (zero action)
    total += problem.cost(xs[-1], np.zeros(problem.d_u))
    return xs, total


def swing_up_policy(state, gain):
    """Energy-based swing-up torque with a linear catch near the top.

    Below the upright energy level, apply full torque in the direction of
    motion to pump energy in; above it, brake; near upright, switch to the
    linear feedback ``gain``.  Returns a clamped scalar torque.
    """
    theta, theta_dot = wrap_angle(float(state[0])), float(state[1])
    near_top = abs(theta) < 0.4 and abs(theta_dot) < 2.0
    e_top = MASS * GRAVITY * LENGTH / 2.0
    if near_top:
        u = float(np.asarray(gain).reshape(-1) @ np.array([theta, theta_dot]))
    elif pendulum_energy(state) < e_top:
        direction = np.sign(theta_dot) if theta_dot != 0 else -np.sign(theta)
        if direction == 0:
            direction = 1.0
        u = TORQUE_LIMIT * direction
    else:
        u = -TORQUE_LIMIT * np.sign(theta_dot)
    return float(np.clip(u, -TORQUE_LIMIT, TORQUE_LIMIT))


def swing_up_warm_start(x0, horizon):
    """Torque sequence of the swing-up policy, used to initialize the
    planner: the all-zeros initialization sits in a plateau of the cost
    landscape that local improvement cannot escape."""
    from .control import lqr_gain

    A, B = linearize(np.zeros(2), 0.0)
    K = lqr_gain(A, B, np.diag([1.0, 0.1]), np.array([[0.001]]))
    x = np.asarray(x0, dtype=float)
    us = []
    for _ in range(horizon):
        u = swing_up_policy(x, K)
        us.append(np.array([u]))
        x = pendulum_step(x, u)
    return us


def swing_up_plan(x0, horizon, config=None):
    """Plan a swing-up with the iterative planner from a warm start."""
    return ilqr_plan(x0, horizon, problem=pendulum_problem(), config=config,
                     u_init=swing_up_warm_start(x0, horizon),
                     angular_state=True)


def _state_delta(a, b, angular):
    d = a - b
    if angular:
        d = d.copy()
        d[0] = wrap_angle(d[0])
    return d


def ilqr_plan(x0, horizon, problem=None, config=None, u_init=None,
              angular_state=False):
    """Plan an open-loop action sequence by iterative linearization.

    Returns (actions, states, info).  The backward pass adds a state
    regularizer mu that grows tenfold whenever the control Hessian fails to
    be positive definite and shrinks tenfold after an accepted step; the
    forward pass backtracks over step sizes and accepts the first decrease.
    """
    if horizon < 1:
        raise ContractViolation("horizon must be >= 1")
    problem = pendulum_problem() if problem is None else problem
    config = IlqrConfig() if config is None else config
    d_x, d_u = problem.d_x, problem.d_u
    us = [np.zeros(d_u) for _ in range(horizon)] if u_init is None else \
        [np.asarray(u, dtype=float) for u in u_init]
    xs, cost = _rollout(problem, x0, us)
    mu = config.reg_init
    history = [cost]
    iterations_run = 0
    for it in range(config.iterations):
        iterations_run = it + 1
        # backward pass
        while True:
            if mu > config.reg_max:
                raise IlqrDiverged(mu, it)
            ok, ks, Ks = _backward(problem, xs, us, mu, config)
            if ok:
                break
            mu *= 10.0
        # forward pass with backtracking
        improved = False
        for alpha in config.alphas:
            new_us = []
            new_xs = [xs[0]]
            for k in range(horizon):
                dx = _state_delta(new_xs[-1], xs[k], angular_state)
                u = problem.clamp_u(us[k] + alpha * ks[k] + Ks[k] @ dx)
                new_us.append(u)
                new_xs.append(problem.dynamics(new_xs[-1], u))
            new_cost = sum(problem.cost(new_xs[k], new_us[k])
                           for k in range(horizon))
            new_cost += problem.cost(new_xs[-1], np.zeros(d_u))
            if new_cost < cost:
                xs, us, cost = new_xs, new_us, new_cost
                improved = True
                break
        if improved:
            mu = max(config.reg_min, mu / 10.0)
            history.append(cost)
            if len(history) > 1 and history[-2] - history[-1] < config.tolerance:
                break
        else:
            mu *= 10.0
            if mu > config.reg_max:
                break
    info = {"cost": cost, "iterations": iterations_run,
            "cost_history": history, "mu": mu}
    return us, xs, info


def _backward(problem, xs, us, mu, config):
    horizon = len(us)
    d_x, d_u = problem.d_x, problem.d_u
    # terminal value: expand the state-only cost
    lx, _, lxx, _, _ = problem.cost_expansion(xs[-1], np.zeros(d_u))
    Vx, Vxx = lx, lxx
    ks = [None] * horizon
    Ks = [None] * horizon
    for k in range(horizon - 1, -1, -1):
        A, B = problem.linearizer(xs[k], us[k])
        lx, lu, lxx, luu, lux = problem.cost_expansion(xs[k], us[k])
        Qx = lx + A.T @ Vx
        Qu = lu + B.T @ Vx
        Qxx = lxx + A.T @ Vxx @ A
        Quu = luu + B.T @ Vxx @ B
        Qux = lux + B.T @ Vxx @ A
        # gains come from the mu-regularized control Hessian; the value
        # recursion below keeps the unregularized quantities
        reg = Vxx + mu * np.eye(d_x)
        Quu_reg = luu + B.T @ reg @ B
        Qux_reg = lux + B.T @ reg @ A
        try:
            np.linalg.cholesky(Quu_reg)
        except np.linalg.LinAlgError:
            return False, None, None
        k_vec = -np.linalg.solve(Quu_reg, Qu)
        K_mat = -np.linalg.solve(Quu_reg, Qux_reg)
        ks[k] = k_vec
        Ks[k] = K_mat
        Vx = Qx + K_mat.T @ Quu @ k_vec + K_mat.T @ Qu + Qux.T @ k_vec
        Vxx = Qxx + K_mat.T @ Quu @ K_mat + K_mat.T @ Qux + Qux.T @ K_mat
        Vxx = 0.5 * (Vxx + Vxx.T)
    return True, ks, Ks
