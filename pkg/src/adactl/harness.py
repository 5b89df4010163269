"""Experiment orchestration: configs, seeded runs, best-in-hindsight
comparators, adaptive-regret reports, and CSV/JSON persistence.

A run is fully determined by (config, seed).  Every controller in a run is
driven against the identical disturbance realization; each controller owns
its trajectory, since its actions determine its states.
"""

import configparser
import csv
import hashlib
import json
import logging
import os

import numpy as np

from .oco import ContractViolation, DecisionSet, rescale_to_unit, \
    finite_difference_gradient
from .lds import ConfigurationError, make_system, DisturbanceSource, step
from .control import QuadraticCost, LqrController, GpcController, \
    MetaController, StabilizerCache
from . import pendulum as pend

log = logging.getLogger("adactl")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_SCHEMA = {
    "experiment": {"t", "seeds", "intervals", "window"},
    "system": {"kind"},
    "noise": {"kind", "std", "bound", "segments", "amplitude",
              "window_lo", "window_hi", "base"},
}
_CONTROLLER_KEYS = {
    "lqr": {"type"},
    "gpc": {"type", "history", "lr", "lr_decay", "gamma", "start", "policy",
            "track_system"},
    "meta": {"type", "history", "lr", "lr_decay", "gamma", "eta", "sigma",
             "selection", "birth_stride", "lifetime_pad", "single_expert",
             "action_state", "policy"},
    "ilqr": {"type", "iterations"},
}
_SYSTEM_KINDS = ("fixed", "switching", "drifting", "pendulum")
_NOISE_KINDS = ("zero", "gaussian", "sinusoidal", "alternating", "shock")


class ExperimentConfig:
    """Validated experiment description parsed from a sectioned key-value file.

    Sections: [experiment] (t, seeds, intervals, window), [system] (kind),
    [noise] (kind + parameters), and one [controller:<name>] section per
    controller with a ``type`` key plus type-specific hyperparameters.
    Unknown sections or keys are hard errors.
    """

    def __init__(self, T, seeds, system_kind, noise, controllers,
                 intervals="dyadic", window=None):
        if T < 1:
            raise ConfigurationError("t must be >= 1")
        if not seeds:
            raise ConfigurationError("at least one seed is required")
        if system_kind not in _SYSTEM_KINDS:
            raise ConfigurationError(f"unknown system kind {system_kind!r}")
        if noise.get("kind", "zero") not in _NOISE_KINDS:
            raise ConfigurationError(f"unknown noise kind {noise.get('kind')!r}")
        if intervals not in ("dyadic", "full"):
            raise ConfigurationError("intervals must be 'dyadic' or 'full'")
        if not controllers:
            raise ConfigurationError("at least one controller is required")
        for name, params in controllers.items():
            kind = params.get("type")
            if kind not in _CONTROLLER_KEYS:
                raise ConfigurationError(
                    f"controller {name!r} has unknown type {kind!r}")
        self.T = int(T)
        self.seeds = [int(s) for s in seeds]
        self.system_kind = system_kind
        self.noise = dict(noise)
        self.controllers = {k: dict(v) for k, v in controllers.items()}
        self.intervals = intervals
        self.window = window

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"cannot read config file {path!r}")
        return cls.from_parser(parser)

    @classmethod
    def from_string(cls, text):
        parser = configparser.ConfigParser()
        parser.read_string(text)
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser):
        sections = dict()
        controllers = {}
        for section in parser.sections():
            keys = set(parser[section])
            if section.startswith("controller:"):
                name = section.split(":", 1)[1]
                kind = parser[section].get("type")
                allowed = _CONTROLLER_KEYS.get(kind)
                if allowed is None:
                    raise ConfigurationError(
                        f"controller {name!r} has unknown type {kind!r}")
                extra = keys - allowed
                if extra:
                    raise ConfigurationError(
                        f"unknown keys in [{section}]: {sorted(extra)}")
                controllers[name] = dict(parser[section])
            elif section in _SCHEMA:
                extra = keys - _SCHEMA[section]
                if extra:
                    raise ConfigurationError(
                        f"unknown keys in [{section}]: {sorted(extra)}")
                sections[section] = dict(parser[section])
            else:
                raise ConfigurationError(f"unknown section [{section}]")
        exp = sections.get("experiment", {})
        sys_sec = sections.get("system", {})
        if "t" not in exp:
            raise ConfigurationError("[experiment] requires key t")
        if "kind" not in sys_sec:
            raise ConfigurationError("[system] requires key kind")
        try:
            T = int(exp["t"])
            seeds = [int(s) for s in exp.get("seeds", "0 1 2").split()]
        except ValueError as e:
            raise ConfigurationError(f"bad numeric value: {e}")
        window = exp.get("window")
        return cls(T, seeds, sys_sec["kind"], sections.get("noise", {"kind": "zero"}),
                   controllers, intervals=exp.get("intervals", "dyadic"),
                   window=None if window is None else int(window))

    def as_dict(self):
        return {"t": self.T, "seeds": self.seeds,
                "system": self.system_kind, "noise": self.noise,
                "controllers": self.controllers, "intervals": self.intervals}


def _param(params, key, cast, default):
    if key not in params:
        return default
    raw = params[key]
    if cast is bool:
        return str(raw).lower() in ("1", "true", "yes")
    try:
        return cast(raw)
    except ValueError as e:
        raise ConfigurationError(f"bad value for {key!r}: {e}")


# ---------------------------------------------------------------------------
# Run traces
# ---------------------------------------------------------------------------

class RunTrace:
    """Per-step records of one controller's rollout."""

    def __init__(self, d_x, d_u):
        self.d_x = int(d_x)
        self.d_u = int(d_u)
        self.t = []
        self.states = []
        self.actions = []
        self.disturbances = []
        self.costs = []
        self.cum_costs = []
        self.norm_costs = []
        self.experts = []
        self.noise_hash = None

    def record(self, t, state, action, disturbance, cost, expert=-1):
        self.t.append(int(t))
        self.states.append(np.atleast_1d(np.asarray(state, float)).copy())
        self.actions.append(np.atleast_1d(np.asarray(action, float)).copy())
        self.disturbances.append(np.atleast_1d(np.asarray(disturbance, float)).copy())
        self.costs.append(float(cost))
        prev = self.cum_costs[-1] if self.cum_costs else 0.0
        self.cum_costs.append(prev + float(cost))
        self.norm_costs.append(rescale_to_unit(float(cost)))
        self.experts.append(int(expert))

    def __len__(self):
        return len(self.t)

    def header(self):
        cols = ["t", "cost", "cum_cost", "expert"]
        cols += [f"theta{i}" for i in range(self.d_x)]
        cols += [f"u{i}" for i in range(self.d_u)]
        cols += [f"w{i}" for i in range(self.d_x)]
        cols += ["cost_norm"]
        return cols

    def rows(self):
        for i in range(len(self.t)):
            row = [self.t[i], repr(float(self.costs[i])),
                   repr(float(self.cum_costs[i])), self.experts[i]]
            row += [repr(float(v)) for v in self.states[i]]
            row += [repr(float(v)) for v in self.actions[i]]
            row += [repr(float(v)) for v in self.disturbances[i]]
            row += [repr(float(self.norm_costs[i]))]
            yield row


def sliding_window_average(costs, horizon=None):
    """At index t (0-based), the mean cost over the past min(t+1, T//3) steps."""
    costs = np.asarray(costs, dtype=float)
    T = costs.size if horizon is None else int(horizon)
    win_cap = max(1, T // 3)
    csum = np.concatenate([[0.0], np.cumsum(costs)])
    out = np.empty(costs.size)
    for t in range(costs.size):
        w = min(t + 1, win_cap)
        out[t] = (csum[t + 1] - csum[t + 1 - w]) / w
    return out


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

class StepError(RuntimeError):
    """Controller failure with the step index attached."""

    def __init__(self, name, t, original):
        super().__init__(f"controller {name!r} failed at step {t}: {original}")
        self.controller = name
        self.t = t
        self.original = original


def _noise_source(cfg, T, dim, rng):
    params = cfg.noise
    kind = params.get("kind", "zero")
    kwargs = {}
    if "std" in params:
        kwargs["std"] = float(params["std"])
    if "bound" in params:
        kwargs["bound"] = float(params["bound"])
    if "segments" in params:
        kwargs["segments"] = int(params["segments"])
    if kind == "shock":
        if "amplitude" in params:
            kwargs["amplitude"] = float(params["amplitude"])
        lo = int(params.get("window_lo", T // 3))
        hi = int(params.get("window_hi", 2 * T // 3))
        kwargs["window"] = (lo, hi)
        base_kind = params.get("base", "zero")
        base_kwargs = {}
        if base_kind in ("gaussian", "alternating"):
            base_kwargs["rng"] = rng
            if "std" in params:
                base_kwargs["std"] = float(params["std"])
        kwargs["base"] = DisturbanceSource(base_kind, dim, T, **base_kwargs)
    if kind in ("gaussian", "alternating"):
        kwargs["rng"] = rng
    return DisturbanceSource(kind, dim, T, **kwargs)


def _build_controller(name, params, system, T, rng, stabilizers, x0,
                      policy=None):
    kind = params["type"]
    wants_policy = params.get("policy", "linear")
    if wants_policy not in ("linear", "swing_up"):
        raise ConfigurationError(f"unknown policy {wants_policy!r}")
    if wants_policy == "swing_up" and policy is None:
        raise ConfigurationError(
            "policy swing_up is only available on the pendulum system")
    policy = policy if wants_policy == "swing_up" else None
    if kind == "lqr":
        return LqrController(system, Q=stabilizers.Q, R=stabilizers.R, x0=x0)
    if kind == "gpc":
        return GpcController(
            system,
            history=_param(params, "history", int, 10),
            lr=_param(params, "lr", float, 0.01),
            gamma=_param(params, "gamma", float, 5.0),
            lr_decay=params.get("lr_decay"),
            start=_param(params, "start", int, 1),
            track_system=_param(params, "track_system", bool, True),
            stabilizers=stabilizers, x0=x0, policy=policy)
    if kind == "meta":
        return MetaController(
            system, T, rng,
            eta=_param(params, "eta", float, 0.05),
            sigma=_param(params, "sigma", float, 0.01),
            history=_param(params, "history", int, 10),
            lr=_param(params, "lr", float, 0.01),
            gamma=_param(params, "gamma", float, 5.0),
            lr_decay=params.get("lr_decay"),
            selection=params.get("selection", "sample"),
            birth_stride=_param(params, "birth_stride", int, 1),
            lifetime_pad=_param(params, "lifetime_pad", int, 0),
            single_expert=_param(params, "single_expert", bool, False),
            action_state=params.get("action_state", "simulated"),
            stabilizers=stabilizers, x0=x0, policy=policy)
    raise ConfigurationError(f"controller type {kind!r} not valid here")


def _stream_hash(ws):
    h = hashlib.sha256()
    for w in ws:
        h.update(np.asarray(w, dtype=float).tobytes())
    return h.hexdigest()


def run_experiment(config, seed):
    """Run every configured controller against the same realization.

    Returns a dict mapping controller name to RunTrace.  Deterministic
    given (config, seed).
    """
    T = config.T
    names = list(config.controllers)
    children = np.random.SeedSequence(seed).spawn(len(names) + 2)
    noise_rng = np.random.default_rng(children[0])
    start_rng = np.random.default_rng(children[1])
    ctrl_rngs = {name: np.random.default_rng(children[2 + i])
                 for i, name in enumerate(names)}

    if config.system_kind == "pendulum":
        return _run_pendulum(config, noise_rng, start_rng, ctrl_rngs)

    system = make_system(config.system_kind, T)
    noise = _noise_source(config, T, system.d_x, noise_rng)
    ws = [noise.at(t) for t in range(1, T + 1)]
    whash = _stream_hash(ws)
    cost = QuadraticCost()
    traces = {}
    for name in names:
        params = config.controllers[name]
        if params["type"] == "ilqr":
            raise ConfigurationError("ilqr controller requires the pendulum system")
        stabilizers = StabilizerCache()
        ctrl = _build_controller(name, params, system, T,
                                 ctrl_rngs[name], stabilizers, None)
        trace = RunTrace(system.d_x, system.d_u)
        trace.noise_hash = whash
        x = np.zeros(system.d_x)
        for t in range(1, T + 1):
            try:
                u = np.atleast_1d(np.asarray(ctrl.act(t), float))
                c = cost.value(x, u)
                A, B = system.matrices(t)
                x_next = step(A, B, x, u, ws[t - 1])
                ctrl.observe(x_next, A, B, cost)
            except Exception as e:  # noqa: BLE001 - re-raised with context
                raise StepError(name, t, e) from e
            expert = ctrl.chosen[-1] if isinstance(ctrl, MetaController) else -1
            trace.record(t, x, u, ws[t - 1], c, expert)
            x = x_next
        traces[name] = trace
        log.info("controller %s: total cost %.4f", name, trace.cum_costs[-1])
    return traces


class _LinearizedPendulum:
    """Adapter exposing the pendulum's current linearization as an LTV system.

    The driver refreshes ``current`` each step before the controller acts,
    so ``matrices(t)`` always reflects the controller's own trajectory.
    """

    def __init__(self):
        self.d_x = 2
        self.d_u = 1
        self.noise_bound = 1.0
        self.current = pend.linearize(np.zeros(2), 0.0)

    def matrices(self, t):
        return self.current


def _run_pendulum(config, noise_rng, start_rng, ctrl_rngs):
    T = config.T
    noise = _noise_source(config, T, 2, noise_rng)
    ws = [noise.at(t) for t in range(1, T + 1)]
    whash = _stream_hash(ws)
    x0 = np.array([start_rng.uniform(-np.pi, np.pi),
                   start_rng.uniform(-1.0, 1.0)])
    cost = QuadraticCost(np.diag([1.0, 0.1]), np.array([[0.001]]))
    traces = {}
    for name, params in config.controllers.items():
        kind = params["type"]
        trace = RunTrace(2, 1)
        trace.noise_hash = whash
        if kind == "ilqr":
            iters = _param(params, "iterations", int, 10)
            try:
                plan, _, _ = pend.swing_up_plan(
                    x0, T, config=pend.IlqrConfig(iterations=iters))
            except pend.IlqrDiverged as e:
                raise StepError(name, 0, e) from e
            x = x0.copy()
            for t in range(1, T + 1):
                u = float(np.clip(plan[t - 1][0], -pend.TORQUE_LIMIT,
                                  pend.TORQUE_LIMIT))
                c = pend.pendulum_cost(x, u)
                trace.record(t, x, [u], ws[t - 1], c, -1)
                x = pend.pendulum_step(x, u) + ws[t - 1]
            traces[name] = trace
            continue
        adapter = _LinearizedPendulum()
        stabilizers = StabilizerCache(cost.Q, cost.R)

        def swing_policy(state, stabilizers=stabilizers):
            A, B = pend.linearize(state, 0.0)
            return np.array([pend.swing_up_policy(state,
                                                  stabilizers.gain(A, B))])

        ctrl = _build_controller(name, params, adapter, T,
                                 ctrl_rngs[name], stabilizers, x0,
                                 policy=swing_policy)
        # the angle stays wrapped so the nearest upright is always the
        # goal; the wrap jump folds into the recovered disturbance
        x = x0.copy()
        for t in range(1, T + 1):
            adapter.current = pend.linearize(x, 0.0)
            try:
                u_raw = np.atleast_1d(np.asarray(ctrl.act(t), float))
                u = float(np.clip(u_raw[0], -pend.TORQUE_LIMIT,
                                  pend.TORQUE_LIMIT))
                c = pend.pendulum_cost(x, u)
                x_next = pend.pendulum_step(x, u) + ws[t - 1]
                x_next[0] = pend.wrap_angle(x_next[0])
                A, B = adapter.current
                ctrl.observe(x_next, A, B, cost)
            except Exception as e:  # noqa: BLE001 - re-raised with context
                raise StepError(name, t, e) from e
            expert = ctrl.chosen[-1] if isinstance(ctrl, MetaController) else -1
            trace.record(t, x, [u], ws[t - 1], c, expert)
            x = x_next
        traces[name] = trace
        log.info("controller %s: total cost %.4f", name, trace.cum_costs[-1])
    return traces


# ---------------------------------------------------------------------------
# Best-in-hindsight comparators
# ---------------------------------------------------------------------------

def best_fixed_point(loss_fns, dset, grad_fns=None, iterations=500,
                     tol=1e-10, z0=None):
    """Minimize the summed loss of one fixed decision by projected gradient.

    Returns (point, value, info); ``info['grad_norm']`` carries the final
    gradient norm and ``info['converged']`` is False with a warning logged
    when the iteration budget is exhausted.
    """
    def total(z):
        return sum(f(z) for f in loss_fns)

    def total_grad(z):
        if grad_fns is not None:
            return sum(np.asarray(g(z), float) for g in grad_fns)
        return finite_difference_gradient(total, z)

    z = dset.project(dset.center if z0 is None else np.asarray(z0, float))
    # conservative stepsize from an initial curvature probe
    g0 = total_grad(z)
    scale = max(1.0, np.linalg.norm(g0))
    eta = dset.diameter / (2.0 * scale)
    converged = False
    for k in range(1, iterations + 1):
        g = total_grad(z)
        z_new = dset.project(z - (eta / np.sqrt(k)) * g)
        if np.linalg.norm(z_new - z) <= tol:
            z = z_new
            converged = True
            break
        z = z_new
    gnorm = float(np.linalg.norm(total_grad(z)))
    if not converged:
        log.warning("best_fixed_point: no convergence, grad norm %.3e", gnorm)
    return z, float(total(z)), {"grad_norm": gnorm, "converged": converged}


def grid_search_1d(loss_fns, lo, hi, step=1e-3):
    """Brute-force cross-check for one-dimensional decision sets."""
    zs = np.arange(lo, hi + step / 2, step)
    vals = [sum(f(np.array([z])) for f in loss_fns) for z in zs]
    i = int(np.argmin(vals))
    return np.array([zs[i]]), float(vals[i])


class DacComparator:
    """Exact counterfactual rollout cost of a fixed disturbance-feedback
    policy u_t = K_t x_t + sum_j M_j w_{t-j}, as a quadratic form in vec(M).

    ``mats`` lists (A_t, B_t, K_t) over the interval; ``ws`` lists the
    interval's disturbances and ``w_prefix`` the ``history`` disturbances
    before it (newest first, zero-padded as needed).
    """

    def __init__(self, mats, ws, cost, x_start, history, gamma,
                 w_prefix=None):
        self.H = int(history)
        d_x = np.asarray(mats[0][0]).shape[0]
        d_u = np.asarray(mats[0][1]).shape[1]
        self.d_x, self.d_u = d_x, d_u
        self.dset = DecisionSet.block_budget((d_u, d_x), self.H, gamma)
        dim = self.H * d_u * d_x
        prefix = [np.zeros(d_x)] * self.H if w_prefix is None else \
            [np.atleast_1d(np.asarray(w, float)) for w in w_prefix]
        if len(prefix) < self.H:
            prefix = prefix + [np.zeros(d_x)] * (self.H - len(prefix))
        # W[H + i] is the disturbance of interval step i; W[H - j] = w_{r-j}
        W = list(reversed(prefix[:self.H])) + \
            [np.atleast_1d(np.asarray(w, float)) for w in ws]
        P = np.zeros((dim, dim))
        q = np.zeros(dim)
        r = 0.0
        x_off = np.atleast_1d(np.asarray(x_start, float)).copy()
        x_lin = np.zeros((d_x, dim))
        Q = cost.Q if cost.Q is not None else np.eye(d_x)
        R = cost.R if cost.R is not None else np.eye(d_u)
        for i, (A, B, K) in enumerate(mats):
            A = np.asarray(A, float)
            B = np.asarray(B, float)
            K = np.asarray(K, float)
            Tm = np.zeros((d_u, dim))
            for j in range(1, self.H + 1):
                w = W[self.H + i - j]
                for a in range(d_u):
                    base = ((j - 1) * d_u + a) * d_x
                    Tm[a, base:base + d_x] = w
            u_off = K @ x_off
            u_lin = K @ x_lin + Tm
            P += x_lin.T @ Q @ x_lin + u_lin.T @ R @ u_lin
            q += 2 * (x_lin.T @ (Q @ x_off) + u_lin.T @ (R @ u_off))
            r += float(x_off @ Q @ x_off + u_off @ R @ u_off)
            x_off = A @ x_off + B @ u_off + W[self.H + i]
            x_lin = A @ x_lin + B @ u_lin
        self.P = 0.5 * (P + P.T)
        self.q = q
        self.r = r

    def cost(self, flat):
        m = np.asarray(flat, float).reshape(-1)
        return float(m @ self.P @ m + self.q @ m + self.r)

    def grad(self, flat):
        m = np.asarray(flat, float).reshape(-1)
        return 2 * self.P @ m + self.q

    def minimize(self, iterations=500, tol=1e-10, restarts=5, rng=None):
        """Projected gradient descent with random restarts."""
        rng = np.random.default_rng(0) if rng is None else rng
        lip = 2 * max(float(np.linalg.eigvalsh(self.P)[-1]), 1e-12)
        eta = 1.0 / lip
        best = (None, np.inf)
        dim = self.q.size
        for trial in range(restarts):
            if trial == 0:
                m = np.zeros(dim)
            else:
                m = self.dset.project(rng.normal(size=dim))
            for _ in range(iterations):
                m_new = self.dset.project(m - eta * self.grad(m))
                if np.linalg.norm(m_new - m) <= tol:
                    m = m_new
                    break
                m = m_new
            else:
                log.warning("DacComparator: restart %d not converged, "
                            "grad norm %.3e", trial,
                            np.linalg.norm(self.grad(m)))
            v = self.cost(m)
            if v < best[1]:
                best = (m, v)
        return best


def best_dac(mats, ws, cost, x_start, history, gamma, w_prefix=None,
             rng=None):
    """Best fixed disturbance-feedback policy over an interval: (M, cost)."""
    comp = DacComparator(mats, ws, cost, x_start, history, gamma,
                         w_prefix=w_prefix)
    return comp.minimize(rng=rng)


# ---------------------------------------------------------------------------
# Interval grids and reports
# ---------------------------------------------------------------------------

def dyadic_intervals(T):
    """All intervals [i*2^k + 1, (i+1)*2^k] inside [1, T], plus [1, T]."""
    out = []
    k = 0
    while 2 ** k <= T:
        size = 2 ** k
        for i in range(T // size):
            out.append((i * size + 1, (i + 1) * size))
        k += 1
    if (1, T) not in out:
        out.append((1, T))
    return out


def all_intervals(T):
    if T > 512:
        raise ContractViolation("full interval grid limited to T <= 512")
    return [(r, s) for r in range(1, T + 1) for s in range(r, T + 1)]


def interval_grid(T, kind="dyadic"):
    if kind == "dyadic":
        return dyadic_intervals(T)
    if kind == "full":
        return all_intervals(T)
    raise ConfigurationError(f"unknown interval grid {kind!r}")


def adaptive_regret_report(alg_costs, comparator_cost, intervals,
                           shift=None, switches=None, stability_gap=None):
    """Per-interval regret against a best-in-hindsight oracle.

    ``alg_costs`` is the per-round cost sequence; ``comparator_cost(r, s)``
    returns the oracle's total cost on [r, s].  Optional trajectory metrics
    are echoed into the report.
    """
    csum = np.concatenate([[0.0], np.cumsum(np.asarray(alg_costs, float))])
    rows = []
    sup = -np.inf
    sup_interval = None
    for (r, s) in intervals:
        alg = csum[s] - csum[r - 1]
        regret = alg - comparator_cost(r, s)
        rows.append({"interval": (r, s), "alg_cost": float(alg),
                     "regret": float(regret)})
        if regret > sup:
            sup, sup_interval = regret, (r, s)
    report = {"intervals": rows, "sup_regret": float(sup),
              "sup_interval": sup_interval}
    if shift is not None:
        report["action_shift"] = float(shift)
    if switches is not None:
        report["switches"] = int(switches)
    if stability_gap is not None:
        report["stability_gap"] = float(stability_gap)
    return report


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def emit_trace(trace, path):
    """Write one RunTrace as CSV with the stable column order."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(trace.header())
            for row in trace.rows():
                writer.writerow(row)
    except OSError as e:
        raise OSError(f"cannot write trace to {path!r}: {e}") from e


def read_trace_csv(path):
    """Parse an emitted CSV back into a dict of named float columns."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            cols = {name: [] for name in header}
            for row in reader:
                for name, value in zip(header, row):
                    cols[name].append(float(value))
    except OSError as e:
        raise OSError(f"cannot read trace from {path!r}: {e}") from e
    return {name: np.asarray(vals) for name, vals in cols.items()}


def emit_summary(config, results_by_seed, path):
    """Aggregate JSON: config echo plus per-controller metric table.

    ``results_by_seed`` maps seed -> {controller name -> RunTrace}.
    Windowed metrics use the harness sliding-window rule; aggregates are
    mean +/- one standard deviation across seeds (labeled as such).
    """
    table = {}
    names = list(next(iter(results_by_seed.values())))
    for name in names:
        totals = []
        finals = []
        for seed, traces in results_by_seed.items():
            tr = traces[name]
            totals.append(tr.cum_costs[-1])
            win = sliding_window_average(tr.costs, len(tr))
            finals.append(float(win[-1]))
        table[name] = {
            "total_cost_mean": float(np.mean(totals)),
            "total_cost_std": float(np.std(totals)),
            "windowed_final_mean": float(np.mean(finals)),
            "windowed_final_std": float(np.std(finals)),
        }
    payload = {"config": config.as_dict(),
               "seeds": list(results_by_seed),
               "band": "mean +/- 1 std",
               "metrics": table}
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
    except OSError as e:
        raise OSError(f"cannot write summary to {path!r}: {e}") from e
    return payload


def run_and_emit(config, out_dir, seeds=None):
    """Run all configured seeds and write per-seed CSVs plus one summary."""
    os.makedirs(out_dir, exist_ok=True)
    seeds = config.seeds if seeds is None else seeds
    results = {}
    for seed in seeds:
        traces = run_experiment(config, seed)
        results[seed] = traces
        for name, trace in traces.items():
            emit_trace(trace, os.path.join(out_dir, f"{name}_seed{seed}.csv"))
    summary = emit_summary(config, results,
                           os.path.join(out_dir, "summary.json"))
    return results, summary
