"""Black-box analysis of pricing mechanisms.

Treats a :class:`~gmech.engine.MechanismHandle` as an opaque map from claims
to node prices and provides, in increasing order of ambition:

* a randomized structural-law suite (monotonicity, identity, time
  consistency, locality, splitting, zero preservation),
* the discrete decomposition of a supermartingale into a price plus a unique
  increasing payout stream,
* extraction of the realized driver and hedge processes of any dominated
  mechanism, with the ``mu * (|y| + |z|)`` envelope enforced,
* probes that read the generating function off input-output behaviour, and
  the full tabulated recovery of that function on a sample grid.

Locality note: claims on a recombining lattice are functions of the terminal
node only, so the locality laws are checked through reachable sets.  A time-s
event is a set of step-s nodes; the nodes it can reach at maturity form its
cone, and the laws say prices on the event depend only on payoff values
inside the cone.  That is the exact lattice content of the indicator
identities for measurable events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    BoundViolated,
    DominationViolated,
    InvalidParams,
    NotSupermartingale,
    StepOutOfRange,
)
from .generators import Generator, GeneratorFlags
from .lattice import AdaptedProcess, Lattice, one_step_expectation, one_step_z
from .engine import (
    DividendStream,
    MechanismHandle,
    TerminalClaim,
    as_mechanism,
    check_domination,
    claim_from_values,
    random_claim,
    require_monotone,
    solve_bsde,
)

AXIOM_TOL = 1e-9


# =====================================================================
# structural-law suite
# =====================================================================

@dataclass
class AxiomCheck:
    name: str
    passed: bool
    samples: int
    failures: int = 0
    worst_margin: float = 0.0
    witness: Optional[dict] = None


@dataclass
class AxiomReport:
    """Per-law verdicts with a counterexample witness on failure."""

    monotonicity: AxiomCheck
    identity: AxiomCheck
    time_consistency: AxiomCheck
    locality: AxiomCheck
    splitting: AxiomCheck
    zero_preservation: AxiomCheck
    locality_with_zero: AxiomCheck
    seed: int = 0

    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks())

    def checks(self):
        return [self.monotonicity, self.identity, self.time_consistency,
                self.locality, self.splitting, self.zero_preservation,
                self.locality_with_zero]

    def as_dict(self) -> dict:
        out = {}
        for c in self.checks():
            out[c.name] = {
                "passed": c.passed,
                "samples": c.samples,
                "failures": c.failures,
                "worst_margin": c.worst_margin,
                "witness": c.witness,
            }
        return out


class _LawTally:
    """Accumulates violations of one law across samples."""

    def __init__(self, name):
        self.name = name
        self.samples = 0
        self.failures = 0
        self.worst = 0.0
        self.witness = None

    def record(self, violation: float, witness: dict):
        self.samples += 1
        if violation > AXIOM_TOL:
            self.failures += 1
            if violation > self.worst:
                self.worst = violation
                self.witness = witness

    def check(self) -> AxiomCheck:
        return AxiomCheck(name=self.name, passed=self.failures == 0,
                          samples=self.samples, failures=self.failures,
                          worst_margin=self.worst, witness=self.witness)


def _reach_mask(step_s: int, step_t: int, nodes_s: np.ndarray) -> np.ndarray:
    """Terminal-node mask of the cone reachable from the given step-s nodes."""
    mask = np.zeros(step_t + 1, dtype=bool)
    width = step_t - step_s
    for j in nodes_s:
        mask[j:j + width + 1] = True
    return mask


def axiom_suite(mech: MechanismHandle, lattice: Lattice, samples: int,
                seed: int = 0) -> AxiomReport:
    """Randomized falsification suite for the pricing-system laws.

    Claims are random piecewise-linear payoffs; events are random node
    subsets at the evaluation step.  Deterministic given ``seed``.
    """
    if samples < 1:
        raise InvalidParams("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = lattice.n_steps
    if n < 3:
        raise InvalidParams("lattice must have at least 3 steps for nested checks")

    mono = _LawTally("monotonicity")
    ident = _LawTally("identity")
    tower = _LawTally("time_consistency")
    local = _LawTally("locality")
    split = _LawTally("splitting")
    zero = _LawTally("zero_preservation")
    local0 = _LawTally("locality_with_zero")

    zero_claim = TerminalClaim(lambda b: np.zeros_like(np.asarray(b, float)),
                               name="zero")

    for k in range(samples):
        t = int(rng.integers(2, n + 1))
        s = int(rng.integers(1, t))
        r = int(rng.integers(0, s))
        claim = random_claim(rng)
        x_vals = claim.values(lattice, t)

        # monotonicity: subtract a nonnegative payoff and require lower prices
        drop = random_claim(rng, bound=0.5, slope=0.5)
        lower = TerminalClaim(lambda b, c=claim, d=drop:
                              np.asarray(c.payoff(b), float)
                              - np.abs(np.asarray(d.payoff(b), float)))
        pa = mech.price_at(s, t, claim)
        pb = mech.price_at(s, t, lower)
        viol = float(np.max(pb - pa))
        mono.record(viol, {"sample": k, "s": s, "t": t, "violation": viol})

        # identity: pricing at its own maturity returns the payoff
        same = mech.price_at(t, t, claim)
        viol = float(np.max(np.abs(same - x_vals)))
        ident.record(viol, {"sample": k, "t": t, "violation": viol})

        # time consistency: price of the intermediate value slice re-prices
        mid = mech.price_at(s, t, claim)
        nested = mech.price_at(r, s, claim_from_values(lattice, s, mid))
        direct = mech.price_at(r, t, claim)
        viol = float(np.max(np.abs(nested - direct)))
        tower.record(viol, {"sample": k, "r": r, "s": s, "t": t,
                            "violation": viol})

        # locality: perturbing the payoff outside an event's cone must not
        # move prices on the event
        event = np.flatnonzero(rng.random(s + 1) < 0.5)
        if event.size == 0:
            event = np.array([int(rng.integers(0, s + 1))])
        cone = _reach_mask(s, t, event)
        bump = np.where(cone, 0.0, rng.normal(size=t + 1))
        perturbed = claim_from_values(lattice, t, x_vals + bump)
        pp = mech.price_at(s, t, perturbed)
        viol = float(np.max(np.abs(pp[event] - pa[event])))
        local.record(viol, {"sample": k, "s": s, "t": t,
                            "event": event.tolist(), "violation": viol})

        # splitting: a claim assembled from two claims along the event cone
        # prices to the assembled prices (the claims agree where the cones
        # overlap, which is the measurability constraint of the lattice)
        other_vals = random_claim(rng).values(lattice, t)
        comp = np.setdiff1d(np.arange(s + 1), event)
        if comp.size:
            cone_c = _reach_mask(s, t, comp)
            overlap = cone & cone_c
            other_vals = np.where(overlap, x_vals, other_vals)
            blend_vals = np.where(cone, x_vals, other_vals)
            po = mech.price_at(s, t, claim_from_values(lattice, t, other_vals))
            pblend = mech.price_at(s, t, claim_from_values(lattice, t, blend_vals))
            expected = np.where(np.isin(np.arange(s + 1), event), pa, po)
            viol = float(np.max(np.abs(pblend - expected)))
            split.record(viol, {"sample": k, "s": s, "t": t,
                                "event": event.tolist(), "violation": viol})

        # zero preservation
        pz = mech.price_at(s, t, zero_claim)
        viol = float(np.max(np.abs(pz)))
        zero.record(viol, {"sample": k, "s": s, "t": t, "violation": viol})

        # locality with zero: kill the payoff outside the cone; prices on the
        # event are unchanged and prices on nodes with disjoint cones vanish
        killed = claim_from_values(lattice, t, np.where(cone, x_vals, 0.0))
        pk = mech.price_at(s, t, killed)
        viol = float(np.max(np.abs(pk[event] - pa[event])))
        outside = [j for j in range(s + 1)
                   if j not in event and not _reach_mask(s, t, np.array([j]))[cone].any()]
        if outside:
            viol = max(viol, float(np.max(np.abs(pk[outside]))))
        local0.record(viol, {"sample": k, "s": s, "t": t,
                             "event": event.tolist(), "violation": viol})

    return AxiomReport(
        monotonicity=mono.check(),
        identity=ident.check(),
        time_consistency=tower.check(),
        locality=local.check(),
        splitting=split.check(),
        zero_preservation=zero.check(),
        locality_with_zero=local0.check(),
        seed=seed,
    )


# =====================================================================
# decomposition of supermartingales
# =====================================================================

@dataclass
class DecompositionResult:
    """Unique increasing payout stream extracted from a supermartingale.

    ``increments.at(i)`` is the per-node payout earned over step ``i``; the
    cumulative compensator is their running sum along a path (it recombines
    only when the increments do, so the increments are the primary object).
    Reconstruction: re-pricing the terminal slice with the extracted stream
    added to the original one reproduces the input node-wise.
    """

    increments: AdaptedProcess
    reconstruction_error: float

    def is_increasing(self, tol: float = 1e-12) -> bool:
        return all(np.all(s >= -tol) for s in self.increments.slices)

    def total_at_root(self) -> float:
        """Cumulative payout along the all-down path from the root (diagnostic)."""
        return float(sum(s[0] for s in self.increments.slices))


def doob_meyer(
    g: Generator,
    y: AdaptedProcess,
    dividends: Optional[DividendStream],
    lattice: Lattice,
    tol: float = 1e-9,
) -> DecompositionResult:
    """Decompose a supermartingale of the driver-priced system.

    The increment at node ``(i, j)`` is the one-step defect

        a(i,j) = y(i,j) - m(i,j) - g(t_i, y(i,j), z(i,j)) dt - dK(i,j),

    the unique extra payout making ``y`` the one-step price of the next
    slice.  Nonnegative defects at every node are exactly the supermartingale
    property; a defect below ``-tol`` raises :class:`NotSupermartingale`.
    """
    require_monotone(g.mu, lattice)
    if y.stop - y.start < 1:
        raise StepOutOfRange("need at least one step to decompose")
    dt = lattice.dt

    incs = []
    worst = (0.0, None)
    for i in range(y.start, y.stop):
        m = one_step_expectation(y, i)
        zz = one_step_z(y, i)
        dk = dividends.increment(i) if dividends is not None else 0.0
        a = y.at(i) - m - g(lattice.grid.time(i), y.at(i), zz) * dt - dk
        j = int(np.argmin(a))
        if a[j] < worst[0]:
            worst = (float(a[j]), (i, j))
        incs.append(a)
    if worst[0] < -tol:
        raise NotSupermartingale(
            f"one-step defect {worst[0]:.3g} at node {worst[1]}; "
            "input is not a supermartingale at this tolerance"
        )

    inc_proc = AdaptedProcess(lattice, y.start, incs)
    base = dividends or DividendStream.zero(lattice)
    total = DividendStream.from_arrays(
        lattice,
        [base.increment(i) + inc_proc.at(i) if y.start <= i <= y.stop - 1
         else base.increment(i) for i in range(lattice.n_steps)],
    )
    rebuilt = solve_bsde(g, claim_from_values(lattice, y.stop, y.at(y.stop)),
                         total, lattice, t_step=y.stop, s_step=y.start).y
    err = max(float(np.max(np.abs(rebuilt.at(i) - y.at(i))))
              for i in range(y.start, y.stop + 1))
    return DecompositionResult(increments=inc_proc, reconstruction_error=err)


# =====================================================================
# driver representation of a dominated mechanism
# =====================================================================

@dataclass
class RepresentationResult:
    """Realized driver and hedge processes of one priced claim.

    ``driver.at(i)`` is the one-step residual per unit time; ``integrand`` the
    hedge coefficients; ``values`` the mechanism's own price surface.  For a
    dominated mechanism the driver obeys ``|driver| <= mu (|value| + |hedge|)``
    node-wise.
    """

    driver: AdaptedProcess
    integrand: AdaptedProcess
    values: AdaptedProcess


def represent(
    mech: MechanismHandle,
    claim: TerminalClaim,
    dividends: Optional[DividendStream],
    lattice: Lattice,
    t_step: int | None = None,
    bound_tol: float = 1e-6,
) -> RepresentationResult:
    """Extract the realized driver of a mechanism on one claim.

    Needs a declared ``mech.mu``; raises :class:`BoundViolated` when the
    extracted driver escapes the envelope by more than ``bound_tol`` (the
    declared constant is too small, or the mechanism is not dominated).
    """
    if mech.mu is None:
        raise InvalidParams("mechanism must declare a domination constant mu")
    t = lattice.n_steps if t_step is None else t_step
    dt = lattice.dt
    surface = mech.price_surface(t, claim, dividends)

    drivers, hedges = [], []
    for i in range(t):
        m = one_step_expectation(surface, i)
        zz = one_step_z(surface, i)
        dk = dividends.increment(i) if dividends is not None else 0.0
        drv = (surface.at(i) - m - dk) / dt
        cap = mech.mu * (np.abs(surface.at(i)) + np.abs(zz))
        excess = float(np.max(np.abs(drv) - cap))
        if excess > bound_tol:
            j = int(np.argmax(np.abs(drv) - cap))
            raise BoundViolated(
                f"driver escapes mu-envelope by {excess:.3g} at node ({i}, {j})"
            )
        drivers.append(drv)
        hedges.append(zz)
    return RepresentationResult(
        driver=AdaptedProcess(lattice, 0, drivers),
        integrand=AdaptedProcess(lattice, 0, hedges),
        values=surface,
    )


def pairwise_representation_gap(a: RepresentationResult, b: RepresentationResult,
                                mu: float) -> float:
    """Worst excess of ``|driver gap| - mu (|value gap| + |hedge gap|)``.

    Nonpositive (up to tolerance) for any two claims priced by one dominated
    mechanism.
    """
    worst = -np.inf
    for i in range(len(a.driver.slices)):
        gap = np.abs(a.driver.at(i) - b.driver.at(i))
        cap = mu * (np.abs(a.values.at(i) - b.values.at(i))
                    + np.abs(a.integrand.at(i) - b.integrand.at(i)))
        worst = max(worst, float(np.max(gap - cap)))
    return worst


# =====================================================================
# probes
# =====================================================================

def z_probe(mech: MechanismHandle, zbar: float, t_step: int, T_step: int,
            anchor: int | None = None) -> float:
    """Read the driver value at hedge level ``zbar`` off the mechanism.

    Prices the claim ``zbar * (B_T - B_t)`` anchored at one step-``t`` node
    and divides by the horizon.  Exact for drivers depending on ``z`` alone.
    """
    if not 0 <= t_step < T_step <= mech.lattice.n_steps:
        raise StepOutOfRange(f"need 0 <= t={t_step} < T={T_step}")
    lat = mech.lattice
    j0 = t_step // 2 if anchor is None else anchor
    b0 = float(lat.node_values(t_step)[j0])
    claim = TerminalClaim(lambda b: zbar * (np.asarray(b, float) - b0),
                          name=f"incr:{zbar:g}")
    vals = mech.price_at(t_step, T_step, claim)
    horizon = lat.grid.time(T_step) - lat.grid.time(t_step)
    return float(vals[j0]) / horizon


def infinitesimal_probe(
    mech: MechanismHandle,
    x: float,
    p: float,
    y: float,
    b_fn: Callable,
    sigma_fn: Callable,
    eps_steps: int,
    t_step: int = 0,
    anchor: int | None = None,
) -> float:
    """Finite-horizon difference quotient of the mechanism at state ``x``.

    Runs the forward Euler state process from one anchor node, prices
    ``y + p (X_{t+eps} - x)`` over ``eps_steps`` lattice steps and returns
    ``(price - y) / eps``.  The caller extrapolates ``eps -> 0``; the limit is
    the driver at ``(t, y, sigma(x) p)`` plus ``p b(x)``.
    """
    if eps_steps < 1:
        raise InvalidParams("eps_steps must be >= 1")
    lat = mech.lattice
    if t_step + eps_steps > lat.n_steps:
        raise StepOutOfRange("probe window exceeds the lattice horizon")
    j0 = t_step // 2 if anchor is None else anchor
    dt, sdt = lat.dt, lat.sqrt_dt

    # forward Euler on the subtree below the anchor; recombining nodes take
    # the average of their two parent propagations
    cur = np.array([float(x)])
    for k in range(eps_steps):
        drift = cur + np.asarray(b_fn(cur), float) * dt
        vol = np.asarray(sigma_fn(cur), float) * sdt
        down = drift - vol
        up = drift + vol
        nxt = np.empty(cur.size + 1)
        nxt[0] = down[0]
        nxt[-1] = up[-1]
        if cur.size > 1:
            nxt[1:-1] = 0.5 * (down[1:] + up[:-1])
        cur = nxt

    t_end = t_step + eps_steps
    state = np.full(t_end + 1, float(x))
    state[j0:j0 + eps_steps + 1] = cur
    # off-subtree nodes clamp to the nearest subtree value
    state[:j0] = cur[0]
    state[j0 + eps_steps + 1:] = cur[-1]
    slice_vals = y + p * (state - x)

    vals = mech.price_at(t_step, t_end, claim_from_values(lat, t_end, slice_vals))
    eps = eps_steps * dt
    return (float(vals[j0]) - y) / eps


# =====================================================================
# generating-function recovery
# =====================================================================

@dataclass
class ProbePath:
    """Forward probe with constant hedge level ``z`` and extremal drift.

    Starts at value ``y`` on one anchor node and evolves on the subtree below
    it by ``Y_{k+1} = Y_k - g_mu(Y_k, z) dt + z dB``; recombining nodes take
    the parent average.  ``slices[k]`` holds the ``k + 1`` subtree values at
    lattice step ``t_step + k``.  By construction the probe is a price path
    of the extremal-driver system, hence a supermartingale under any
    mechanism dominated at level ``mu``.
    """

    lattice: Lattice
    t_step: int
    anchor: int
    y: float
    z: float
    mu: float
    slices: list

    @property
    def window(self) -> int:
        return len(self.slices) - 1


def build_probe_path(
    lattice: Lattice,
    t_step: int,
    y: float,
    z: float,
    mu: float,
    window: int,
    anchor: int | None = None,
) -> ProbePath:
    if window < 1 or t_step + window > lattice.n_steps:
        raise StepOutOfRange("probe window must fit inside the lattice")
    j0 = t_step // 2 if anchor is None else int(anchor)
    if not 0 <= j0 <= t_step:
        raise StepOutOfRange(f"anchor {j0} is not a step-{t_step} node")
    dt, sdt = lattice.dt, lattice.sqrt_dt

    slices = [np.array([float(y)])]
    cur = slices[0]
    for _ in range(window):
        drifted = cur - mu * (np.abs(cur) + abs(z)) * dt
        down = drifted - z * sdt
        up = drifted + z * sdt
        nxt = np.empty(cur.size + 1)
        nxt[0] = down[0]
        nxt[-1] = up[-1]
        if cur.size > 1:
            nxt[1:-1] = 0.5 * (down[1:] + up[:-1])
        slices.append(nxt)
        cur = nxt
    return ProbePath(lattice=lattice, t_step=t_step, anchor=j0, y=float(y),
                     z=float(z), mu=float(mu), slices=slices)


def _subtree_claim(lattice: Lattice, step: int, anchor: int,
                   values: np.ndarray) -> TerminalClaim:
    """Slice claim holding subtree values; off-subtree nodes clamp to the edge.

    Clamped values never influence prices read back at subtree nodes when the
    mechanism is local, which is what the structural-law suite certifies.
    """
    vals = np.asarray(values, dtype=float)
    hi = vals.size - 1

    def payoff(b):
        j = lattice.node_index(step, b) - anchor
        return vals[np.clip(j, 0, hi)]

    return TerminalClaim(payoff, name=f"subtree@{step}")


def _decompose_probe(mech: MechanismHandle, probe: ProbePath,
                     supermartingale_tol: float):
    """Decompose a probe under the mechanism's one-step operator.

    Returns the realized driver at the anchor (first step) after checking the
    supermartingale property and the driver envelope along the window.
    """
    lat = probe.lattice
    dt, sdt = lat.dt, lat.sqrt_dt
    mu = probe.mu
    first_driver = None
    for k in range(probe.window - 1, -1, -1):
        big = probe.t_step + k
        nxt = probe.slices[k + 1]
        claim = _subtree_claim(lat, big + 1, probe.anchor, nxt)
        one_step = mech.price_at(big, big + 1, claim)[probe.anchor:probe.anchor + k + 1]
        defect = probe.slices[k] - one_step
        j = int(np.argmin(defect))
        if defect[j] < -supermartingale_tol:
            raise DominationViolated(
                f"probe (t_step={probe.t_step}, y={probe.y:g}, z={probe.z:g}) "
                f"has defect {defect[j]:.3g} at subtree node ({k}, {j}); "
                f"mechanism is not dominated at mu={mu:g}"
            )
        mean_next = 0.5 * (nxt[1:] + nxt[:-1])
        hedge = (nxt[1:] - nxt[:-1]) / (2.0 * sdt)
        driver = (one_step - mean_next) / dt
        cap = mu * (np.abs(probe.slices[k]) + np.abs(hedge))
        excess = float(np.max(np.abs(driver) - cap))
        if excess > 1e-6:
            raise BoundViolated(
                f"probe driver escapes mu-envelope by {excess:.3g} "
                f"(t_step={probe.t_step}, y={probe.y:g}, z={probe.z:g})"
            )
        if k == 0:
            first_driver = float(driver[0])
    return first_driver


@dataclass
class RecoveredGenerator:
    """Tabulated generating function read off a black-box mechanism.

    ``table[ti, pi]`` is the recovered value at probe time ``times[ti]`` and
    sample point ``points[pi]``.  ``lipschitz_ratio`` is the worst sampled
    increment ratio over the table (certified ``<= mu`` up to discretization)
    and ``zero_defect`` the worst ``|ghat(t, 0, 0)|`` when the origin was
    sampled.
    """

    level: int
    mu: float
    times: np.ndarray
    time_indices: np.ndarray
    points: list
    table: np.ndarray
    lipschitz_ratio: float
    zero_defect: Optional[float]
    grid: Optional[tuple] = None

    def rows(self):
        for ti, t in enumerate(self.times):
            for pi, (yv, zv) in enumerate(self.points):
                yield float(t), float(yv), float(zv), float(self.table[ti, pi])

    def value(self, t: float, y, z):
        """Interpolated value: previous probe time, bilinear in ``(y, z)``.

        Points must form a full grid; queries clamp to the grid box, which
        preserves the Lipschitz certificate.
        """
        if self.grid is None:
            raise InvalidParams("sample points do not form a full (y, z) grid")
        ys, zs = self.grid
        ti = int(np.clip(np.searchsorted(self.times, t, side="right") - 1,
                         0, len(self.times) - 1))
        sheet = self.table[ti].reshape(len(ys), len(zs))
        y = np.clip(np.asarray(y, dtype=float), ys[0], ys[-1])
        z = np.clip(np.asarray(z, dtype=float), zs[0], zs[-1])
        iy = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(ys) - 2)
        iz = np.clip(np.searchsorted(zs, z, side="right") - 1, 0, len(zs) - 2)
        y0, y1 = ys[iy], ys[iy + 1]
        z0, z1 = zs[iz], zs[iz + 1]
        # singleton axes alias their only cell; the clipped query then sits
        # on the lower edge, so a unit denominator keeps the weight at zero
        wy = (y - y0) / np.where(y1 > y0, y1 - y0, 1.0)
        wz = (z - z0) / np.where(z1 > z0, z1 - z0, 1.0)
        v00 = sheet[iy, iz]
        v01 = sheet[iy, iz + 1]
        v10 = sheet[iy + 1, iz]
        v11 = sheet[iy + 1, iz + 1]
        return ((1 - wy) * (1 - wz) * v00 + (1 - wy) * wz * v01
                + wy * (1 - wz) * v10 + wy * wz * v11)

    def to_generator(self) -> Generator:
        """Interpolating driver usable by the backward solver."""
        return Generator(
            fn=lambda t, y, z: self.value(t, y, z) + 0.0 * (np.asarray(y) + np.asarray(z)),
            mu=self.mu,
            flags=GeneratorFlags(zero_at_zero=self.zero_defect is not None
                                 and self.zero_defect <= 1e-6),
            name=f"recovered(level={self.level})",
        )

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "mu": self.mu,
            "lipschitz_ratio": self.lipschitz_ratio,
            "zero_defect": self.zero_defect,
            "rows": [
                {"t": t, "y": yv, "z": zv, "g": gv}
                for t, yv, zv, gv in self.rows()
            ],
        }


def _detect_grid(points):
    # interpolation reshapes table rows to (len(ys), len(zs)), so the points
    # must be exactly the row-major grid enumeration, not any permutation
    ys = np.array(sorted({p[0] for p in points}))
    zs = np.array(sorted({p[1] for p in points}))
    if len(ys) * len(zs) != len(points):
        return None
    if points != grid_points(ys, zs):
        return None
    return ys, zs


def grid_points(ys, zs) -> list:
    """Row-major (y, z) grid as a sample-point list for the recovery."""
    return [(float(a), float(b)) for a in ys for b in zs]


def recover_generator(
    mech: MechanismHandle,
    level: int,
    sample_points: Sequence,
    lattice: Lattice | None = None,
    time_indices: Sequence[int] | None = None,
    supermartingale_tol: float = 1e-9,
) -> RecoveredGenerator:
    """Tabulate the generating function of a dominated mechanism.

    For every dyadic time ``t_i = i T / 2^level`` and every sample point
    ``(y, z)``: launch the extremal-drift probe from ``(t_i, y)`` at hedge
    level ``z``, decompose it as a supermartingale under the mechanism's
    one-step operator, and record the realized driver at the probe's start.
    The probe window is one dyadic interval, which is exactly the span the
    tabulation consumes.

    The lattice step count must be divisible by ``2^level`` so dyadic times
    sit on the grid.  A probe whose one-step defect dips below the tolerance
    raises :class:`DominationViolated`: the mechanism is not dominated at its
    declared ``mu``.
    """
    lat = lattice or mech.lattice
    if mech.mu is None:
        raise InvalidParams("mechanism must declare a domination constant mu")
    if level < 0 or lat.n_steps % (1 << level) != 0:
        raise InvalidParams(
            f"lattice step count {lat.n_steps} is not divisible by 2^{level}"
        )
    require_monotone(mech.mu, lat)
    points = [(float(a), float(b)) for a, b in sample_points]
    if not points:
        raise InvalidParams("need at least one sample point")

    window = lat.n_steps // (1 << level)
    idx = (np.arange(1 << level, dtype=int) if time_indices is None
           else np.asarray(sorted(set(int(i) for i in time_indices)), dtype=int))
    if idx.size == 0 or idx[0] < 0 or idx[-1] >= (1 << level):
        raise InvalidParams(f"time indices must lie in [0, {(1 << level) - 1}]")

    table = np.zeros((idx.size, len(points)))
    for row, i in enumerate(idx):
        t_step = int(i) * window
        for col, (yv, zv) in enumerate(points):
            probe = build_probe_path(lat, t_step, yv, zv, mech.mu, window)
            table[row, col] = _decompose_probe(mech, probe, supermartingale_tol)

    # Lipschitz certificate over the tabulated values, per probe time
    worst_ratio = 0.0
    pts = np.asarray(points)
    for row in range(idx.size):
        for a in range(len(points)):
            sep = np.abs(pts[:, 0] - pts[a, 0]) + np.abs(pts[:, 1] - pts[a, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.abs(table[row] - table[row, a]) / sep
            ratios[~np.isfinite(ratios)] = 0.0
            worst_ratio = max(worst_ratio, float(np.max(ratios)))

    zero_defect = None
    origin = [c for c, p in enumerate(points) if p == (0.0, 0.0)]
    if origin:
        zero_defect = float(np.max(np.abs(table[:, origin[0]])))

    times = np.array([lat.grid.time(int(i) * window) for i in idx])
    return RecoveredGenerator(
        level=level, mu=float(mech.mu), times=times, time_indices=idx,
        points=points, table=table, lipschitz_ratio=worst_ratio,
        zero_defect=zero_defect, grid=_detect_grid(points),
    )


@dataclass
class MainTheoremVerdict:
    """Outcome of rebuilding a mechanism from its recovered generator."""

    max_discrepancy: float
    axioms_ok: bool
    domination_ok: bool
    recovered: RecoveredGenerator

    def passed(self, tol: float = 1e-2) -> bool:
        return self.axioms_ok and self.domination_ok and self.max_discrepancy <= tol


def verify_main_theorem(
    mech: MechanismHandle,
    lattice: Lattice | None = None,
    samples: int = 10,
    seed: int = 0,
    level: int | None = None,
    ys: Sequence[float] = (-2.0, -1.0, 0.0, 1.0, 2.0),
    zs: Sequence[float] = (-2.0, -1.0, 0.0, 1.0, 2.0),
) -> MainTheoremVerdict:
    """Recover the generator, rebuild the pricing system, compare prices.

    Preconditions are exercised first at small sample counts: the structural
    laws and the domination cap on random claim pairs.  Then random bounded
    claims are priced under both the black box and the rebuilt system and the
    worst node discrepancy over all steps is reported.
    """
    lat = lattice or mech.lattice
    if mech.mu is None:
        raise InvalidParams("mechanism must declare a domination constant mu")
    if level is None:
        level = int(round(math.log2(lat.n_steps)))
    rng = np.random.default_rng(seed)

    report = axiom_suite(mech, lat, samples=max(4, samples // 2), seed=seed)
    dom_ok = True
    for _ in range(max(2, samples // 4)):
        a = random_claim(rng)
        b = random_claim(rng)
        if not check_domination(mech, a, b, mech.mu, lat).passed:
            dom_ok = False
            break

    recovered = recover_generator(mech, level, grid_points(ys, zs), lat)
    rebuilt = as_mechanism(recovered.to_generator(), lat)

    worst = 0.0
    n = lat.n_steps
    for _ in range(samples):
        claim = random_claim(rng)
        sa = mech.price_surface(n, claim)
        sb = rebuilt.price_surface(n, claim)
        for i in range(n + 1):
            worst = max(worst, float(np.max(np.abs(sa.at(i) - sb.at(i)))))
    return MainTheoremVerdict(max_discrepancy=worst,
                              axioms_ok=report.all_passed(),
                              domination_ok=dom_ok,
                              recovered=recovered)
