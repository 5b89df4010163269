"""Adaptive expert meta-algorithms with shrinking.

Contains the full weighted pool over N experts, the sparse pool that only
tracks the O(log T) currently-active experts (unborn and expired experts are
pooled), the dyadic working-set rule, the doubling learning-rate schedule,
and an adversarial loss sequence exhibiting the regret/shift tradeoff.
"""

import numpy as np

from .oco import ContractViolation


def _categorical(probs, u):
    """Inverse-CDF draw from ``probs`` using a single uniform ``u``."""
    c = np.cumsum(probs)
    return int(np.searchsorted(c, u * c[-1], side="right").clip(0, probs.size - 1))


class ExpertPool:
    """Multiplicative-weights pool over N experts with shrinking.

    Selection keeps the previous expert with probability equal to its
    one-round weight-decay ratio (clamped to 1), otherwise resamples from the
    current weights.  Weights decay as exp(-eta * value) and are smoothed
    toward uniform with mixing coefficient sigma.

    When ``lifetimes`` is given as (birth, death) arrays the pool mirrors the
    sparse implementation exactly: expired experts are sampled through their
    pooled average probability and retained through the pooled decay ratio,
    so index traces can be compared one-to-one against SparseExpertPool.
    """

    def __init__(self, n, eta, sigma, rng, lifetimes=None, selection="sample"):
        if not eta >= 0:
            raise ContractViolation("eta must be nonnegative")
        if not 0 <= sigma < 1:
            raise ContractViolation("sigma must lie in [0, 1)")
        if selection not in ("sample", "argmax"):
            raise ContractViolation(f"unknown selection mode {selection!r}")
        self.n = int(n)
        self.eta = float(eta)
        self.sigma = float(sigma)
        self.rng = rng
        self.selection = selection
        self.weights = np.ones(self.n) / self.n
        self.retention = np.ones(self.n)
        self.index = None
        self.t = 0
        self.switches = 0
        if lifetimes is None:
            self.birth = None
            self.death = None
        else:
            self.birth = np.asarray(lifetimes[0], dtype=int)
            self.death = np.asarray(lifetimes[1], dtype=int)

    def _sampling_probs(self, t):
        p = self.weights.copy()
        if self.birth is not None:
            dead = self.death < t
            if np.any(dead):
                p[dead] = p[dead].sum() / dead.sum()
        return p / p.sum()

    def select(self):
        """Pick the expert to follow this round; consumes the pool's RNG."""
        self.t += 1
        t = self.t
        if self.selection == "argmax":
            new = int(np.argmax(self._sampling_probs(t)))
            if self.index is not None and new != self.index:
                self.switches += 1
            self.index = new
            return self.index
        if self.index is None:
            self.index = _categorical(self._sampling_probs(t), self.rng.uniform())
            return self.index
        u = self.rng.uniform()
        # an expert already expired in the previous round retains through the
        # pooled decay ratio, matching the sparse implementation exactly
        if self.birth is not None and self.death[self.index] < t - 1:
            keep_p = min(1.0, self._dead_retention)
        else:
            keep_p = min(1.0, self.retention[self.index])
        if u >= keep_p:
            new = _categorical(self._sampling_probs(t), self.rng.uniform())
            if new != self.index:
                self.switches += 1
            self.index = new
        return self.index

    def update(self, values):
        """Decay weights by the observed values and smooth toward uniform."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n,):
            raise ContractViolation("one value per expert required")
        if np.any(values < -1e-12) or np.any(values > 1 + 1e-12):
            raise ContractViolation("expert values must lie in [0, 1]")
        bar = self.weights * np.exp(-self.eta * values)
        if not np.all(np.isfinite(bar)):
            raise ContractViolation("non-finite weight after update")
        new = (1 - self.sigma) * bar + self.sigma * bar.sum() / self.n
        self.retention = new / self.weights
        if self.birth is not None:
            dead = self.death < self.t
            old_mass = self.weights[dead].sum()
            self._dead_retention = new[dead].sum() / old_mass if old_mass > 0 else 1.0
        self.weights = new / new.sum()

    def probs(self):
        return self.weights / self.weights.sum()


# ---------------------------------------------------------------------------
# Working sets
# ---------------------------------------------------------------------------

def _lifetime(i):
    """Number of rounds index i stays alive: 2^(k+2) + 1 where i = r 2^k, r odd."""
    i = int(i)
    k = (i & -i).bit_length() - 1
    return (1 << (k + 2)) + 1


def working_set(t, horizon=None):
    """Indices alive at round t: those i <= t with t <= i + lifetime(i)."""
    if t < 1 or (horizon is not None and t > horizon):
        raise ContractViolation("round out of range")
    return [i for i in range(1, t + 1) if t <= i + _lifetime(i)]


class WorkingSets:
    """Incrementally maintained alive-index sets over a fixed horizon."""

    def __init__(self, horizon):
        self.horizon = int(horizon)

    def alive(self, t):
        return working_set(t, self.horizon)

    def birth(self, i):
        return i

    def death(self, i, cap=None):
        e = i + _lifetime(i)
        return min(e, cap) if cap is not None else e

    def expired(self, t):
        """Indices alive at t but not at t+1 (at most one)."""
        return [i for i in self.alive(t) if t + 1 > i + _lifetime(i)]


class SparseExpertPool:
    """Expert pool over N = T indices that stores O(log T) weights.

    Active indices (the working set) carry individual weights; unborn
    indices share a single weight; expired indices are pooled into one
    total mass.  All inactive experts play the same fixed fallback point,
    so pooled bookkeeping preserves the selection law of the full pool.
    """

    def __init__(self, horizon, eta, sigma, rng, selection="sample",
                 lifetime_pad=0, birth_stride=1):
        if selection not in ("sample", "argmax"):
            raise ContractViolation(f"unknown selection mode {selection!r}")
        self.horizon = int(horizon)
        self.eta = float(eta)
        self.sigma = float(sigma)
        self.rng = rng
        self.selection = selection
        self.lifetime_pad = int(lifetime_pad)
        self.birth_stride = int(birth_stride)
        self.n = self.horizon
        # active weights, keyed by birth index, plus pooled masses
        self.active = {1: 1.0}
        self.w_unborn = 1.0
        self.dead_mass = 0.0
        self.index = None
        self.t = 0
        self.switches = 0
        self._retention_active = {}
        self._retention_unborn = 1.0
        self._retention_dead = 1.0

    def _is_born(self, i):
        if self.birth_stride == 1:
            return True
        return i == 1 or (i - 1) % self.birth_stride == 0

    def _alive(self, t):
        alive = [i for i in working_set(t) if self._is_born(i)]
        if self.lifetime_pad:
            pad = [i for i in range(1, t + 1) if self._is_born(i)
                   and i + max(_lifetime(i), self.lifetime_pad) >= t
                   and i not in alive]
            alive = sorted(alive + pad)
        return alive

    def alive_indices(self):
        return sorted(self.active.keys())

    def _n_unborn(self, t):
        if self.birth_stride == 1:
            return self.n - t
        return sum(1 for i in range(t + 1, self.n + 1) if self._is_born(i))

    def _n_dead(self, t):
        born = t if self.birth_stride == 1 else \
            sum(1 for i in range(1, t + 1) if self._is_born(i))
        return born - len(self.active)

    def total_mass(self, t=None):
        t = self.t if t is None else t
        return (sum(self.active.values()) + self._n_unborn(t) * self.w_unborn
                + self.dead_mass)

    def _sampling_probs(self, t):
        """Per-index probabilities over 1..N in index order."""
        probs = np.empty(self.n)
        n_dead = self._n_dead(t)
        dead_p = self.dead_mass / n_dead if n_dead else 0.0
        for i in range(1, self.n + 1):
            if i in self.active:
                probs[i - 1] = self.active[i]
            elif i > t or not self._is_born(i):
                probs[i - 1] = self.w_unborn if self._is_born(i) else 0.0
            else:
                probs[i - 1] = dead_p
        return probs / probs.sum()

    def select(self):
        self.t += 1
        t = self.t
        if self.selection == "argmax":
            # index 0 signals the pooled (fallback-playing) group
            best = max(self.active, key=lambda i: self.active[i])
            pooled = max(self.w_unborn if self._n_unborn(t) else -np.inf,
                         self.dead_mass / self._n_dead(t) if self._n_dead(t) else -np.inf)
            new = best if self.active[best] >= pooled else 0
            if self.index is not None and new != self.index:
                self.switches += 1
            self.index = new
            return self.index
        if self.index is None:
            self.index = 1 + _categorical(self._sampling_probs(t), self.rng.uniform())
            return self.index
        u = self.rng.uniform()
        i = self.index
        if i in self._retention_active:
            keep_p = self._retention_active[i]
        elif i > t - 1 or not self._is_born(i):
            keep_p = self._retention_unborn
        else:
            keep_p = self._retention_dead
        if u >= min(1.0, keep_p):
            new = 1 + _categorical(self._sampling_probs(t), self.rng.uniform())
            if new != self.index:
                self.switches += 1
            self.index = new
        return self.index

    def update(self, active_values, fallback_value):
        """Weight update for round t; advances the alive set to t+1.

        ``active_values`` maps alive index -> surrogate value; inactive
        experts all scored ``fallback_value`` (they play the fallback point).
        """
        t = self.t
        if set(active_values) != set(self.active):
            raise ContractViolation("values must cover exactly the active set")
        for v in list(active_values.values()) + [fallback_value]:
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ContractViolation("expert values must lie in [0, 1]")
        decay0 = np.exp(-self.eta * fallback_value)
        bar = {i: w * np.exp(-self.eta * active_values[i])
               for i, w in self.active.items()}
        bar_u = self.w_unborn * decay0
        bar_dead = self.dead_mass * decay0
        n_unborn = self._n_unborn(t)
        n_dead = self._n_dead(t)
        bar_total = sum(bar.values()) + n_unborn * bar_u + bar_dead
        if not np.isfinite(bar_total):
            raise ContractViolation("non-finite weight after update")
        mix = self.sigma * bar_total / self.n
        new = {i: (1 - self.sigma) * b + mix for i, b in bar.items()}
        new_u = (1 - self.sigma) * bar_u + mix
        new_dead = (1 - self.sigma) * bar_dead + n_dead * mix

        self._retention_active = {i: new[i] / self.active[i] for i in new}
        self._retention_unborn = new_u / self.w_unborn
        # move expired actives into the dead pool; pooled retention excludes them
        expired = [i for i in self.active
                   if i + max(_lifetime(i), self.lifetime_pad) < t + 1]
        if len(expired) > 1 and self.lifetime_pad == 0 and self.birth_stride == 1:
            raise ContractViolation("more than one expert expired in a round")
        # a just-expired expert still retains through its own ratio next round
        moved = 0.0
        for i in expired:
            moved += new.pop(i)
        self._retention_dead = (new_dead / self.dead_mass) if self.dead_mass > 0 else 1.0
        new_dead += moved

        self.active = new
        self.w_unborn = new_u
        self.dead_mass = new_dead
        if t + 1 <= self.horizon and self._is_born(t + 1):
            self.active[t + 1] = self.w_unborn
        # renormalize all masses by the same total; ratios above are unscaled
        total = self.total_mass(t + 1)
        for i in self.active:
            self.active[i] /= total
        self.w_unborn /= total
        self.dead_mass /= total
        for i in self._retention_active:
            self._retention_active[i] = min(1.0, self._retention_active[i])
        self._retention_unborn = min(1.0, self._retention_unborn)
        self._retention_dead = min(1.0, self._retention_dead)


# ---------------------------------------------------------------------------
# Monte-Carlo estimation of the selection law
# ---------------------------------------------------------------------------

def pool_weight_history(values_table, eta, sigma):
    """Analytic weight evolution for a fixed loss table.

    Returns (weights, retention): arrays of shape (T, N) where weights[t]
    are the normalized weights used in round t+1 and retention[t] the decay
    ratios applied when deciding whether to keep the round-t index at t+1.
    """
    values_table = np.asarray(values_table, dtype=float)
    T, n = values_table.shape
    weights = np.empty((T, n))
    retention = np.empty((T, n))
    w = np.ones(n) / n
    for t in range(T):
        weights[t] = w
        bar = w * np.exp(-eta * values_table[t])
        new = (1 - sigma) * bar + sigma * bar.sum() / n
        retention[t] = np.minimum(1.0, new / w)
        w = new / new.sum()
    return weights, retention


def simulate_index_paths(weights, retention, trials, rng):
    """Vectorized index chains under the keep-or-resample selection rule.

    Returns an array of shape (trials, T) of chosen indices (0-based) plus
    the per-trial switch counts.
    """
    T, n = weights.shape
    idx = np.empty((trials, T), dtype=np.int64)
    cdf0 = np.cumsum(weights[0])
    idx[:, 0] = np.searchsorted(cdf0, rng.uniform(size=trials) * cdf0[-1],
                                side="right").clip(0, n - 1)
    for t in range(1, T):
        cur = idx[:, t - 1]
        keep = rng.uniform(size=trials) < retention[t - 1][cur]
        u = rng.uniform(size=trials)
        cdf = np.cumsum(weights[t])
        resampled = np.searchsorted(cdf, u * cdf[-1], side="right").clip(0, n - 1)
        idx[:, t] = np.where(keep, cur, resampled)
    switches = (idx[:, 1:] != idx[:, :-1]).sum(axis=1)
    return idx, switches


# ---------------------------------------------------------------------------
# Learning-rate schedule with restarts
# ---------------------------------------------------------------------------

class EpochSchedule:
    """Doubling budget schedule: restart with a fresh learning rate whenever
    the best expert's cumulative surrogate loss outgrows the current budget
    C * 4^e."""

    def __init__(self, base=1.0):
        if base <= 0:
            raise ContractViolation("base constant must be positive")
        self.base = float(base)
        self.epoch = 0

    @property
    def budget(self):
        return self.base * 4.0 ** self.epoch

    def eta(self, memory, lipschitz, shift_bound):
        return 1.0 / (4 * memory ** 2 * lipschitz * shift_bound
                      * np.sqrt(self.budget))

    def step(self, min_expert_cum_loss, memory, lipschitz, shift_bound):
        """Return (eta, restart flag); advances the epoch on restart."""
        restart = min_expert_cum_loss + 1 > self.budget
        if restart:
            self.epoch += 1
        return self.eta(memory, lipschitz, shift_bound), restart


# ---------------------------------------------------------------------------
# Adversarial loss sequence
# ---------------------------------------------------------------------------

def alternating_quadratic_losses(T, target_regret):
    """Blocks of (z-1)^2 and (z+1)^2 on [-1, 1] alternating every
    ceil(4 * target_regret) rounds.  Any algorithm with low adaptive regret
    must chase the alternating minima, forcing action shift proportional
    to T / regret.

    Returns the per-round list of target centers c_t (loss (z - c_t)^2).
    """
    k = int(np.ceil(4 * target_regret))
    if k > T:
        raise ContractViolation("block length must not exceed the horizon")
    centers = []
    for t in range(1, T + 1):
        block = (t - 1) // k  # 0-based; even block -> center +1
        centers.append(1.0 if block % 2 == 0 else -1.0)
    return centers
