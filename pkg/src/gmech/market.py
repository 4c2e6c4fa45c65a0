"""Option-chain ingestion and domination audits.

Chain CSV schema (header required, one row per strike, times in days at
365 days/year):

    as_of_days,expiry_days,underlying,strike,call_mid,put_mid

The audit tests, for every ordered strike pair and each of the four payoff
families (call-call, put-put, call-put, put-call), whether the market price
spread is capped by the extremal-driver lattice price of the payoff
difference.  Terminal payoffs are mapped through a driftless lognormal
underlying ``S_T = S0 exp(sigma B_T - sigma^2 tau / 2)`` on the terminal
nodes.  Rows that contradict pointwise payoff ordering across strikes are
flagged separately as monotonicity anomalies.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    EmptyChain,
    InvalidParams,
    InvariantError,
    ParseError,
    SchemaError,
)
from .generators import BSMarketParams, domination_generator
from .engine import require_monotone, solve_terminal_batch
from .lattice import build_grid, build_lattice

DAYS_PER_YEAR = 365.0
PRICE_TOL = 1e-9

_CHAIN_COLUMNS = ("as_of_days", "expiry_days", "underlying", "strike",
                  "call_mid", "put_mid")

_FAMILIES = ("call_call", "put_put", "call_put", "put_call")


# -- closed-form references ----------------------------------------------------

def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def bs_call(s0: float, strike: float, r: float, sigma: float, tau: float) -> float:
    """Lognormal closed-form call value; degenerates to intrinsic at tau or sigma 0."""
    if tau <= 0 or sigma <= 0:
        return max(s0 - strike, 0.0)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma * sigma) * tau) / (sigma * math.sqrt(tau))
    d2 = d1 - sigma * math.sqrt(tau)
    return s0 * _norm_cdf(d1) - strike * math.exp(-r * tau) * _norm_cdf(d2)


def bs_put(s0: float, strike: float, r: float, sigma: float, tau: float) -> float:
    if tau <= 0 or sigma <= 0:
        return max(strike - s0, 0.0)
    d1 = (math.log(s0 / strike) + (r + 0.5 * sigma * sigma) * tau) / (sigma * math.sqrt(tau))
    d2 = d1 - sigma * math.sqrt(tau)
    return strike * math.exp(-r * tau) * _norm_cdf(-d2) - s0 * _norm_cdf(-d1)


# -- chain data ------------------------------------------------------------------

@dataclass
class OptionChain:
    """One expiry's quotes: strictly increasing strikes, nonnegative mids."""

    as_of: float
    expiry: float
    underlying: float
    strikes: np.ndarray
    call_mids: np.ndarray
    put_mids: np.ndarray

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=float)
        self.call_mids = np.asarray(self.call_mids, dtype=float)
        self.put_mids = np.asarray(self.put_mids, dtype=float)
        if not self.expiry > self.as_of:
            raise InvariantError(
                f"expiry {self.expiry} must lie after as_of {self.as_of}"
            )
        if self.strikes.size and np.any(np.diff(self.strikes) <= 0):
            raise InvariantError("strikes must be strictly increasing")
        for name in ("strikes", "call_mids", "put_mids"):
            arr = getattr(self, name)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InvariantError(f"{name} must be finite and >= 0")
        if not (self.strikes.size == self.call_mids.size == self.put_mids.size):
            raise InvariantError("strike/call/put columns must align")
        if self.underlying <= 0:
            raise InvariantError("underlying must be > 0")

    @property
    def n_strikes(self) -> int:
        return int(self.strikes.size)

    @property
    def tau(self) -> float:
        return self.expiry - self.as_of

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_CHAIN_COLUMNS)
            for k in range(self.n_strikes):
                w.writerow([
                    repr(float(self.as_of * DAYS_PER_YEAR)),
                    repr(float(self.expiry * DAYS_PER_YEAR)),
                    repr(float(self.underlying)),
                    repr(float(self.strikes[k])),
                    repr(float(self.call_mids[k])),
                    repr(float(self.put_mids[k])),
                ])


def load_chain(path: str) -> OptionChain:
    """Parse and validate a chain CSV (see the module docstring for the schema)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, expected header")
        missing = set(_CHAIN_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            try:
                rows.append({c: float(raw[c]) for c in _CHAIN_COLUMNS})
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise EmptyChain(f"{path}: no data rows")

    for col in ("as_of_days", "expiry_days", "underlying"):
        vals = {r[col] for r in rows}
        if len(vals) > 1:
            raise InvariantError(f"{path}: column {col} is not constant")
    return OptionChain(
        as_of=rows[0]["as_of_days"] / DAYS_PER_YEAR,
        expiry=rows[0]["expiry_days"] / DAYS_PER_YEAR,
        underlying=rows[0]["underlying"],
        strikes=np.array([r["strike"] for r in rows]),
        call_mids=np.array([r["call_mid"] for r in rows]),
        put_mids=np.array([r["put_mid"] for r in rows]),
    )


def synth_chain(
    params: BSMarketParams,
    s0: float,
    strikes,
    as_of: float,
    expiry: float,
    seed: Optional[int] = None,
    noise: float = 0.0,
) -> OptionChain:
    """Synthetic chain with closed-form lognormal mids.

    ``noise`` adds centred gaussian perturbations (clipped at zero) for
    fault-detection experiments; the noiseless chain satisfies put-call
    parity row by row.
    """
    if s0 <= 0:
        raise InvalidParams(f"s0 must be > 0, got {s0}")
    tau = expiry - as_of
    if tau <= 0:
        raise InvalidParams("expiry must lie after as_of")
    strikes = np.asarray(strikes, dtype=float)
    calls = np.array([bs_call(s0, k, params.r, params.sigma, tau) for k in strikes])
    puts = np.array([bs_put(s0, k, params.r, params.sigma, tau) for k in strikes])
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        calls = np.clip(calls + rng.normal(0.0, noise, calls.size), 0.0, None)
        puts = np.clip(puts + rng.normal(0.0, noise, puts.size), 0.0, None)
    return OptionChain(as_of=as_of, expiry=expiry, underlying=s0,
                       strikes=strikes, call_mids=calls, put_mids=puts)


# -- domination audit --------------------------------------------------------------

@dataclass
class FamilyCount:
    tested: int = 0
    passed: int = 0
    violated: int = 0


@dataclass
class DominationReport:
    """Audit outcome: per-family counts plus itemized violations and anomalies."""

    mu: float
    n_steps: int
    vol: float
    families: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    anomalies: list = field(default_factory=list)

    @property
    def total_tested(self) -> int:
        return sum(c.tested for c in self.families.values())

    @property
    def total_violated(self) -> int:
        return sum(c.violated for c in self.families.values())

    def clean(self) -> bool:
        return self.total_violated == 0 and not self.anomalies

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "n_steps": self.n_steps,
            "vol": self.vol,
            "families": {
                name: {"tested": c.tested, "passed": c.passed,
                       "violated": c.violated}
                for name, c in self.families.items()
            },
            "total_tested": self.total_tested,
            "total_violated": self.total_violated,
            "violations": self.violations,
            "anomalies": self.anomalies,
        }


def _scan_anomalies(chain: OptionChain) -> list:
    """Adjacent-strike contradictions of pointwise payoff ordering.

    Calls shrink pointwise as the strike rises, puts grow; a strict inversion
    of either order cannot come from any monotone pricing map.
    """
    out = []
    for k in range(chain.n_strikes - 1):
        if chain.call_mids[k] < chain.call_mids[k + 1]:
            out.append({
                "family": "call", "i": k, "j": k + 1,
                "strike_i": float(chain.strikes[k]),
                "strike_j": float(chain.strikes[k + 1]),
                "price_i": float(chain.call_mids[k]),
                "price_j": float(chain.call_mids[k + 1]),
            })
        if chain.put_mids[k] > chain.put_mids[k + 1]:
            out.append({
                "family": "put", "i": k, "j": k + 1,
                "strike_i": float(chain.strikes[k]),
                "strike_j": float(chain.strikes[k + 1]),
                "price_i": float(chain.put_mids[k]),
                "price_j": float(chain.put_mids[k + 1]),
            })
    return out


def _max_workers() -> int:
    raw = os.environ.get("GMECH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_domination_test(
    chain: OptionChain,
    mu: float,
    n_steps: int,
    vol_for_lattice: float,
    tol: float = PRICE_TOL,
) -> DominationReport:
    """Audit all four inequality families over every ordered strike pair.

    The right-hand sides are lattice prices of the payoff differences under
    the extremal driver at level ``mu``; a pair violates when the market
    spread exceeds its cap by more than ``tol``.  Deterministic given
    ``(chain, mu, n_steps, vol_for_lattice)`` regardless of thread count.
    """
    if chain.n_strikes == 0:
        raise EmptyChain("chain has no rows")
    if vol_for_lattice <= 0:
        raise InvalidParams("vol_for_lattice must be > 0")
    lattice = build_lattice(build_grid(0.0, chain.tau, n_steps))
    require_monotone(mu, lattice)

    terminal_b = lattice.node_values(n_steps)
    s_term = chain.underlying * np.exp(
        vol_for_lattice * terminal_b - 0.5 * vol_for_lattice ** 2 * chain.tau
    )
    call_pay = np.maximum(s_term[None, :] - chain.strikes[:, None], 0.0)
    put_pay = np.maximum(chain.strikes[:, None] - s_term[None, :], 0.0)

    sides = {
        "call_call": (chain.call_mids, call_pay, chain.call_mids, call_pay),
        "put_put": (chain.put_mids, put_pay, chain.put_mids, put_pay),
        "call_put": (chain.call_mids, call_pay, chain.put_mids, put_pay),
        "put_call": (chain.put_mids, put_pay, chain.call_mids, call_pay),
    }
    m = chain.n_strikes
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    keep = ii.ravel() != jj.ravel()
    ii, jj = ii.ravel()[keep], jj.ravel()[keep]
    g_cap = domination_generator(mu)

    def run_family(name):
        left_mid, left_pay, right_mid, right_pay = sides[name]
        lhs = left_mid[ii] - right_mid[jj]
        rhs = solve_terminal_batch(g_cap, left_pay[ii] - right_pay[jj], lattice)
        return name, lhs, rhs

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict()
            for name, lhs, rhs in pool.map(run_family, _FAMILIES):
                results[name] = (lhs, rhs)
    else:
        results = {name: (lhs, rhs)
                   for name, lhs, rhs in map(run_family, _FAMILIES)}

    report = DominationReport(mu=float(mu), n_steps=int(n_steps),
                              vol=float(vol_for_lattice))
    for name in _FAMILIES:
        lhs, rhs = results[name]
        bad = lhs > rhs + tol
        count = FamilyCount(tested=int(lhs.size),
                            passed=int(lhs.size - np.count_nonzero(bad)),
                            violated=int(np.count_nonzero(bad)))
        report.families[name] = count
        for k in np.flatnonzero(bad):
            report.violations.append({
                "family": name, "i": int(ii[k]), "j": int(jj[k]),
                "lhs": float(lhs[k]), "rhs": float(rhs[k]),
                "margin": float(rhs[k] - lhs[k]),
            })
    report.violations.sort(key=lambda v: (v["family"], v["i"], v["j"]))
    report.anomalies = _scan_anomalies(chain)
    return report
