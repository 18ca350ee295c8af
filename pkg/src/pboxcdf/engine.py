"""Variable store and fixpoint propagation for p-box cdf-interval constraints.

Constraints register watch lists on their variables and sit in a FIFO wake
queue.  A propagator re-enters the queue only when one of its variables moved
by more than the global tolerance in any scalar component, so runs terminate
at a stable fixpoint.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .pbox import (
    DivisorStraddlesZero,
    Inconsistent,
    PboxInterval,
    anchor_lower,
    anchor_upper,
    convex_interval,
    meet,
    point_mass,
    repair_dominance,
    tighter_lower,
    tighter_upper,
    tolerance,
)
from .arith import QuantileInterval, slide

CONSISTENT = "consistent"
FAILED = "failed"

_KIND_ARITY = {"eq": 2, "leq": 2, "add": 3, "sub": 3, "mul": 3, "div": 3}


@dataclass(frozen=True, slots=True)
class Constraint:
    """A constraint record over variable ids.

    Binary kinds: ``eq``, ``leq``.  Ternary kinds ``add``, ``sub``, ``mul``,
    ``div`` relate ``args[0] op args[1] = args[2]``.
    """

    kind: str
    args: tuple[int, ...]

    def __post_init__(self):
        arity = _KIND_ARITY.get(self.kind)
        if arity is None:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if len(self.args) != arity:
            raise ValueError(
                f"constraint {self.kind!r} takes {arity} variables, got {len(self.args)}"
            )


def coerce_domain(initial) -> PboxInterval:
    """Accept a PboxInterval, a (lo, hi) quantile range (convex embedding) or
    a scalar (point mass)."""
    if isinstance(initial, PboxInterval):
        return initial
    if isinstance(initial, (int, float)):
        return point_mass(float(initial))
    if isinstance(initial, (tuple, list)) and len(initial) == 2:
        return convex_interval(float(initial[0]), float(initial[1]))
    raise ValueError(f"cannot interpret {initial!r} as a variable domain")


class DomainStore:
    """Solver state: domains, constraints, watch lists and the wake queue.

    A store is single-threaded; clones are cheap and independent, which is
    how search explores alternatives.
    """

    def __init__(self):
        self.domains: list[PboxInterval] = []
        self.names: list[str] = []
        self.constraints: list[Constraint] = []
        self._watchers: list[list[int]] = []
        self._queue: deque[int] = deque()
        self._queued: list[bool] = []
        self.status: str = CONSISTENT
        self.stats = {"wakes": 0, "prunes": 0, "skipped_div_projections": 0}
        self._shared_topology = False

    # -- construction ------------------------------------------------------

    def new_var(self, initial, name: str | None = None) -> int:
        domain = coerce_domain(initial)
        if self._shared_topology:
            self._unshare()
        vid = len(self.domains)
        self.domains.append(domain)
        self.names.append(name if name is not None else f"v{vid}")
        self._watchers.append([])
        return vid

    def post(self, constraint: Constraint) -> None:
        """Register a constraint and enqueue it once.  No-op on a failed store."""
        if self.status == FAILED:
            return
        for vid in constraint.args:
            if not 0 <= vid < len(self.domains):
                raise ValueError(f"constraint references unknown variable {vid}")
        if self._shared_topology:
            self._unshare()
        idx = len(self.constraints)
        self.constraints.append(constraint)
        self._queued.append(False)
        for vid in set(constraint.args):
            self._watchers[vid].append(idx)
        self._enqueue(idx)

    def clone(self) -> "DomainStore":
        """Independent copy sharing the (append-only) constraint topology."""
        other = DomainStore.__new__(DomainStore)
        other.domains = list(self.domains)
        other.names = self.names
        other.constraints = self.constraints
        other._watchers = self._watchers
        other._queue = deque(self._queue)
        other._queued = list(self._queued)
        other.status = self.status
        other.stats = dict(self.stats)
        other._shared_topology = True
        self._shared_topology = True
        return other

    def _unshare(self) -> None:
        self.names = list(self.names)
        self.constraints = list(self.constraints)
        self._watchers = [list(w) for w in self._watchers]
        self._shared_topology = False

    # -- propagation -------------------------------------------------------

    def _enqueue(self, idx: int) -> None:
        if not self._queued[idx]:
            self._queued[idx] = True
            self._queue.append(idx)

    def fail(self) -> None:
        """Mark the store inconsistent and drop all pending wakes."""
        self.status = FAILED
        self._queue.clear()
        for i in range(len(self._queued)):
            self._queued[i] = False

    def _update(self, vid: int, new: PboxInterval) -> None:
        old = self.domains[vid]
        if new is old:
            return
        tol = tolerance()
        if (
            abs(new.lo.q - old.lo.q) <= tol
            and abs(new.lo.f - old.lo.f) <= tol
            and abs(new.lo.s - old.lo.s) <= tol
            and abs(new.hi.q - old.hi.q) <= tol
            and abs(new.hi.f - old.hi.f) <= tol
            and abs(new.hi.s - old.hi.s) <= tol
        ):
            return
        self.domains[vid] = new
        self.stats["prunes"] += 1
        for idx in self._watchers[vid]:
            self._enqueue(idx)

    def tighten(self, vid: int, narrower) -> str:
        """Meet a variable's domain with a narrower one and propagate wakes."""
        if self.status == FAILED:
            return FAILED
        try:
            self._update(vid, meet(self.domains[vid], coerce_domain(narrower)))
        except Inconsistent:
            self.fail()
        return self.status

    def propagate(self) -> str:
        """Run queued propagators to fixpoint; returns the resulting status."""
        if self.status == FAILED:
            return FAILED
        queue = self._queue
        while queue:
            idx = queue.popleft()
            self._queued[idx] = False
            self.stats["wakes"] += 1
            c = self.constraints[idx]
            try:
                self._run(c)
            except Inconsistent:
                self.fail()
                return FAILED
        return CONSISTENT

    def _run(self, c: Constraint) -> None:
        kind = c.kind
        if kind == "eq":
            self._prop_eq(*c.args)
        elif kind == "leq":
            self._prop_leq(*c.args)
        elif kind == "add":
            self._prop_add(*c.args)
        elif kind == "sub":
            self._prop_sub(*c.args)
        elif kind == "mul":
            self._prop_mul(*c.args)
        else:
            self._prop_div(*c.args)

    def _qrange(self, vid: int) -> QuantileInterval:
        d = self.domains[vid]
        return QuantileInterval(d.lo.q, d.hi.q)

    def _slide_to(self, vid: int, lo: float, hi: float) -> None:
        # Fast exit for the common fixpoint case where nothing contracts.
        d = self.domains[vid]
        if lo <= d.lo.q and hi >= d.hi.q:
            return
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval arithmetic overflowed to [{lo!r}, {hi!r}]")
        self._update(vid, slide(d, QuantileInterval(lo, hi)))

    def _prop_eq(self, x: int, y: int) -> None:
        merged = meet(self.domains[x], self.domains[y])
        self._update(x, merged)
        self._update(y, merged)

    def _prop_leq(self, x: int, y: int) -> None:
        # x <= y: quantile bounds inherit across; pointwise F_x >= F_y lets
        # x borrow y's lower cdf line and y borrow x's upper one.
        dx = self.domains[x]
        dy = self.domains[y]

        x_hi_q = min(dx.hi.q, dy.hi.q)
        if dx.lo.q > x_hi_q:
            if dx.lo.q - x_hi_q > tolerance():
                raise Inconsistent(f"ordering wipes out {self.names[x]!r}")
            x_hi_q = dx.lo.q
        mid_x = 0.5 * (dx.lo.q + x_hi_q)
        low_x = tighter_lower(dx.hi, dy.hi, mid_x)
        self._update(
            x, repair_dominance(PboxInterval(dx.lo, anchor_lower(low_x, x_hi_q)))
        )

        dx = self.domains[x]
        y_lo_q = max(dy.lo.q, dx.lo.q)
        if y_lo_q > dy.hi.q:
            if y_lo_q - dy.hi.q > tolerance():
                raise Inconsistent(f"ordering wipes out {self.names[y]!r}")
            y_lo_q = dy.hi.q
        mid_y = 0.5 * (y_lo_q + dy.hi.q)
        up_y = tighter_upper(dy.lo, dx.lo, mid_y)
        self._update(
            y, repair_dominance(PboxInterval(anchor_upper(up_y, y_lo_q), dy.hi))
        )

    def _prop_add(self, x: int, y: int, z: int) -> None:
        dx, dy = self.domains[x], self.domains[y]
        self._slide_to(z, dx.lo.q + dy.lo.q, dx.hi.q + dy.hi.q)
        dz, dy = self.domains[z], self.domains[y]
        self._slide_to(x, dz.lo.q - dy.hi.q, dz.hi.q - dy.lo.q)
        dz, dx = self.domains[z], self.domains[x]
        self._slide_to(y, dz.lo.q - dx.hi.q, dz.hi.q - dx.lo.q)

    def _prop_sub(self, x: int, y: int, z: int) -> None:
        dx, dy = self.domains[x], self.domains[y]
        self._slide_to(z, dx.lo.q - dy.hi.q, dx.hi.q - dy.lo.q)
        dz, dy = self.domains[z], self.domains[y]
        self._slide_to(x, dz.lo.q + dy.lo.q, dz.hi.q + dy.hi.q)
        dz, dx = self.domains[z], self.domains[x]
        self._slide_to(y, dx.lo.q - dz.hi.q, dx.hi.q - dz.lo.q)

    def _mul_range(self, a: PboxInterval, b: PboxInterval) -> tuple[float, float]:
        products = (
            a.lo.q * b.lo.q,
            a.lo.q * b.hi.q,
            a.hi.q * b.lo.q,
            a.hi.q * b.hi.q,
        )
        return min(products), max(products)

    def _div_range(self, a: PboxInterval, b: PboxInterval) -> tuple[float, float]:
        inv = QuantileInterval(1.0 / b.hi.q, 1.0 / b.lo.q)
        products = (
            a.lo.q * inv.lo,
            a.lo.q * inv.hi,
            a.hi.q * inv.lo,
            a.hi.q * inv.hi,
        )
        return min(products), max(products)

    def _prop_mul(self, x: int, y: int, z: int) -> None:
        dx, dy = self.domains[x], self.domains[y]
        self._slide_to(z, *self._mul_range(dx, dy))
        dy = self.domains[y]
        if dy.lo.q <= 0.0 <= dy.hi.q:
            self.stats["skipped_div_projections"] += 1
        else:
            self._slide_to(x, *self._div_range(self.domains[z], dy))
        dx = self.domains[x]
        if dx.lo.q <= 0.0 <= dx.hi.q:
            self.stats["skipped_div_projections"] += 1
        else:
            self._slide_to(y, *self._div_range(self.domains[z], dx))

    def _prop_div(self, x: int, y: int, z: int) -> None:
        # The forward projection is a hard error on a zero-straddling divisor;
        # reverse projections just skip, which is sound but weaker.
        dx, dy = self.domains[x], self.domains[y]
        if dy.lo.q <= 0.0 <= dy.hi.q:
            raise DivisorStraddlesZero(
                f"divisor range [{dy.lo.q!r}, {dy.hi.q!r}] contains zero"
            )
        self._slide_to(z, *self._div_range(dx, dy))
        dz, dy = self.domains[z], self.domains[y]
        self._slide_to(x, *self._mul_range(dz, dy))
        dz = self.domains[z]
        if dz.lo.q <= 0.0 <= dz.hi.q:
            self.stats["skipped_div_projections"] += 1
        else:
            self._slide_to(y, *self._div_range(self.domains[x], dz))


# -- model files -----------------------------------------------------------


def parse_model(obj: dict) -> tuple[DomainStore, list[str]]:
    """Build a store from the model JSON structure.

    Variables carry either a full ``domain``, a convex ``range`` or a scalar
    ``value``; constraints name variables by their declared names.
    """
    if not isinstance(obj, dict):
        raise ValueError("model must be a JSON object")
    store = DomainStore()
    ids: dict[str, int] = {}
    order: list[str] = []
    for spec in obj.get("vars", []):
        name = spec.get("name")
        if not isinstance(name, str) or not name:
            raise ValueError(f"variable needs a name: {spec!r}")
        if name in ids:
            raise ValueError(f"duplicate variable {name!r}")
        if "domain" in spec:
            domain = PboxInterval.from_dict(spec["domain"])
        elif "range" in spec:
            lo, hi = spec["range"]
            domain = convex_interval(float(lo), float(hi))
        elif "value" in spec:
            domain = point_mass(float(spec["value"]))
        else:
            raise ValueError(f"variable {name!r} needs a domain, range or value")
        ids[name] = store.new_var(domain, name=name)
        order.append(name)
    for spec in obj.get("constraints", []):
        kind = spec.get("kind")
        args = spec.get("args", [])
        if kind not in _KIND_ARITY:
            raise ValueError(f"unknown constraint kind {kind!r}")
        resolved = []
        for arg in args:
            if arg not in ids:
                raise ValueError(f"constraint references unknown variable {arg!r}")
            resolved.append(ids[arg])
        store.post(Constraint(kind, tuple(resolved)))
    return store, order


def solution_dict(store: DomainStore, order: list[str]) -> dict:
    """Final domains plus status, mirroring the model's variable order."""
    by_name = {name: store.domains[vid] for vid, name in enumerate(store.names)}
    return {
        "status": store.status,
        "vars": [
            {"name": name, "domain": by_name[name].to_dict()} for name in order
        ],
    }
