"""Replenishment-scheduling benchmark over p-box cdf-interval domains.

A horizon of demand cycles is modelled as a constraint network: per-cycle
order and stock variables tied by flow balance, cost terms accumulated into
a total cost, and non-negativity as quantile lower bounds.  Search decides
the boolean replenishment schedule by depth-first branch and bound; order
quantities stay interval-valued during search and are pinned to the
cheapest worst-case-covering sizes for reporting.
"""

from __future__ import annotations

import json
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from .pbox import (
    CdfPoint,
    Inconsistent,
    ObservationSet,
    PboxInterval,
    convex_interval,
    empirical_cdf,
    envelope,
    load_observations_csv,
    lower_at,
    point_mass,
    project,
    repair_dominance,
    tolerance,
    upper_at,
)
from .arith import QuantileInterval, q_add, q_mul, q_sub, slide
from .engine import CONSISTENT, FAILED, Constraint, DomainStore

MODES = ("pbox", "convex")

# Symmetric occurrence counts for the five generated demand quantiles.
_DEMAND_COUNTS = (1, 2, 3, 2, 1)

DEFAULT_ORDERING_COST = 250.0
DEFAULT_HOLDING_COST = 2.0
DEFAULT_UNIT_COST = 5.5
DEFAULT_X_MAX = 100.0


@dataclass(frozen=True)
class InventoryInstance:
    """Inputs of the scheduling model.

    Costs and demands may be scalars, p-box intervals or raw observation
    sets; observations are enveloped when the model is built.
    """

    horizon: int
    ordering_cost: object
    holding_cost: object
    unit_cost: object
    demands: tuple
    initial_stock: float = 0.0
    x_min: float = 1.0
    x_max: float = DEFAULT_X_MAX

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if len(self.demands) != self.horizon:
            raise ValueError(
                f"expected {self.horizon} demand entries, got {len(self.demands)}"
            )
        if self.initial_stock < 0.0:
            raise ValueError("initial stock must be >= 0")
        if not 0.0 <= self.x_min <= self.x_max:
            raise ValueError("order size bounds need 0 <= x_min <= x_max")
        for label, spec in (
            ("ordering_cost", self.ordering_cost),
            ("holding_cost", self.holding_cost),
            ("unit_cost", self.unit_cost),
        ):
            if _quantile_low(spec) < 0.0:
                raise ValueError(f"{label} must be non-negative")

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "ordering_cost": _spec_to_json(self.ordering_cost),
            "holding_cost": _spec_to_json(self.holding_cost),
            "unit_cost": _spec_to_json(self.unit_cost),
            "demands": [_spec_to_json(d) for d in self.demands],
            "initial_stock": self.initial_stock,
            "x_min": self.x_min,
            "x_max": self.x_max,
        }

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "InventoryInstance":
        horizon = int(obj["horizon"])
        if "demands" in obj:
            demands = tuple(_spec_from_json(d, base_dir) for d in obj["demands"])
        elif "seed" in obj:
            rng = random.Random(int(obj["seed"]) * 1_000_003 + horizon)
            demands = tuple(generate_demand_observations(horizon, rng))
        else:
            raise ValueError("instance needs either 'demands' or 'seed'")
        return cls(
            horizon=horizon,
            ordering_cost=_spec_from_json(
                obj.get("ordering_cost", DEFAULT_ORDERING_COST), base_dir
            ),
            holding_cost=_spec_from_json(
                obj.get("holding_cost", DEFAULT_HOLDING_COST), base_dir
            ),
            unit_cost=_spec_from_json(obj.get("unit_cost", DEFAULT_UNIT_COST), base_dir),
            demands=demands,
            initial_stock=float(obj.get("initial_stock", 0.0)),
            x_min=float(obj.get("x_min", 1.0)),
            x_max=float(obj.get("x_max", DEFAULT_X_MAX)),
        )

    @classmethod
    def from_file(cls, path) -> "InventoryInstance":
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ImportError:
                raise ValueError(
                    "TOML instances need Python 3.11+; use the JSON form instead"
                ) from None
            with open(path, "rb") as fh:
                obj = tomllib.load(fh)
        else:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        return cls.from_dict(obj, base_dir=path.parent)


def _spec_to_json(spec):
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, PboxInterval):
        return {"domain": spec.to_dict()}
    if isinstance(spec, ObservationSet):
        return {"observations": [[q, c] for q, c in spec.entries]}
    raise ValueError(f"cannot serialize quantity spec {spec!r}")


def _spec_from_json(obj, base_dir: Path | None = None):
    if isinstance(obj, (int, float)):
        return float(obj)
    if isinstance(obj, dict):
        if "domain" in obj:
            return PboxInterval.from_dict(obj["domain"])
        if "observations" in obj:
            return ObservationSet.from_pairs(
                (float(q), int(c)) for q, c in obj["observations"]
            )
        if "csv" in obj:
            path = Path(obj["csv"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_observations_csv(path)
    raise ValueError(f"cannot interpret quantity spec {obj!r}")


def _quantile_low(spec) -> float:
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, PboxInterval):
        return spec.lo.q
    if isinstance(spec, ObservationSet):
        return spec.entries[0][0]
    raise ValueError(f"cannot interpret quantity spec {spec!r}")


def _quantile_high(spec) -> float:
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, PboxInterval):
        return spec.hi.q
    if isinstance(spec, ObservationSet):
        return spec.entries[-1][0]
    raise ValueError(f"cannot interpret quantity spec {spec!r}")


def _domain_of(spec, mode: str) -> PboxInterval:
    """Turn an input quantity into its domain under the chosen representation."""
    if isinstance(spec, (int, float)):
        return point_mass(float(spec))
    if isinstance(spec, PboxInterval):
        if mode == "convex":
            return convex_interval(spec.lo.q, spec.hi.q)
        return spec
    if isinstance(spec, ObservationSet):
        if mode == "convex":
            return convex_interval(spec.entries[0][0], spec.entries[-1][0])
        return envelope(empirical_cdf(spec))
    raise ValueError(f"cannot interpret quantity spec {spec!r}")


# -- initial bindings for derived quantities ---------------------------------


def _upper_complete(d: PboxInterval) -> bool:
    return d.lo.f + d.lo.s * (d.hi.q - d.lo.q) >= 1.0 - tolerance()


def _lower_complete(d: PboxInterval) -> bool:
    return d.hi.f - d.hi.s * (d.hi.q - d.lo.q) <= tolerance()


def _levelwise(f1: float, s1: float, f2: float, s2: float) -> tuple[float, float]:
    # Quantiles of the two bound lines added at equal cdf level: the joint
    # slope is the harmonic combination, the anchor level the slope-weighted
    # average of the anchor levels.
    s = 1.0 / (1.0 / s1 + 1.0 / s2)
    f = s * (f1 / s1 + f2 / s2)
    return min(max(f, 0.0), 1.0), s


def combine_bindings(op: str, a: PboxInterval, b: PboxInterval) -> PboxInterval:
    """Initial binding for a derived quantity ``a op b``.

    Quantile bounds follow real interval arithmetic.  Candidate cdf bound
    lines come from two constructions.  A shifted (for products over
    non-negative ranges, scaled) copy of one operand's own line is sound
    regardless of dependence, but only when its source line spans the full
    [0, 1] range or the other operand is a known constant, since otherwise
    the line would be extrapolated beyond its valid region.  Treating the
    operands as driven by one common level (the convention for this model's
    uncertain quantities) also admits the level-wise combination of both
    lines, whose slope is the harmonic mean; it stays informative through
    long chains of sums where any single shifted line clips to vacuity.
    The tightest candidate at the midpoint wins, and with no candidate at
    all the bound degrades to the convex one.
    """
    ra = QuantileInterval(a.lo.q, a.hi.q)
    rb = QuantileInterval(b.lo.q, b.hi.q)
    op_fn = {"add": q_add, "sub": q_sub, "mul": q_mul}[op]
    rz = op_fn(ra, rb)
    if rz.lo == rz.hi:
        return point_mass(rz.lo)
    deg_a = ra.lo == ra.hi
    deg_b = rb.lo == rb.hi
    uppers: list[CdfPoint] = []
    lowers: list[CdfPoint] = []
    if op == "add":
        if deg_b or _upper_complete(a):
            uppers.append(CdfPoint(rz.lo, a.lo.f, a.lo.s))
        if deg_a or _upper_complete(b):
            uppers.append(CdfPoint(rz.lo, b.lo.f, b.lo.s))
        if deg_b or _lower_complete(a):
            lowers.append(CdfPoint(rz.hi, a.hi.f, a.hi.s))
        if deg_a or _lower_complete(b):
            lowers.append(CdfPoint(rz.hi, b.hi.f, b.hi.s))
        if a.lo.s > 0.0 and b.lo.s > 0.0:
            f, s = _levelwise(a.lo.f, a.lo.s, b.lo.f, b.lo.s)
            uppers.append(CdfPoint(rz.lo, f, s))
        if a.hi.s > 0.0 and b.hi.s > 0.0:
            f, s = _levelwise(a.hi.f, a.hi.s, b.hi.f, b.hi.s)
            lowers.append(CdfPoint(rz.hi, f, s))
    elif op == "sub":
        if deg_b or _upper_complete(a):
            uppers.append(CdfPoint(rz.lo, a.lo.f, a.lo.s))
        if deg_a or _lower_complete(b):
            uppers.append(CdfPoint(rz.lo, 1.0 - b.hi.f, b.hi.s))
        if deg_b or _lower_complete(a):
            lowers.append(CdfPoint(rz.hi, a.hi.f, a.hi.s))
        if deg_a or _upper_complete(b):
            lowers.append(CdfPoint(rz.hi, 1.0 - b.lo.f, b.lo.s))
        if a.lo.s > 0.0 and b.hi.s > 0.0:
            f, s = _levelwise(a.lo.f, a.lo.s, 1.0 - b.hi.f, b.hi.s)
            uppers.append(CdfPoint(rz.lo, f, s))
        if a.hi.s > 0.0 and b.lo.s > 0.0:
            f, s = _levelwise(a.hi.f, a.hi.s, 1.0 - b.lo.f, b.lo.s)
            lowers.append(CdfPoint(rz.hi, f, s))
    elif ra.lo >= 0.0 and rb.lo >= 0.0:
        if rb.lo > 0.0 and (deg_b or _upper_complete(a)):
            uppers.append(CdfPoint(rz.lo, a.lo.f, a.lo.s / rb.lo))
        if ra.lo > 0.0 and (deg_a or _upper_complete(b)):
            uppers.append(CdfPoint(rz.lo, b.lo.f, b.lo.s / ra.lo))
        if rb.hi > 0.0 and (deg_b or _lower_complete(a)):
            lowers.append(CdfPoint(rz.hi, a.hi.f, a.hi.s / rb.hi))
        if ra.hi > 0.0 and (deg_a or _lower_complete(b)):
            lowers.append(CdfPoint(rz.hi, b.hi.f, b.hi.s / ra.hi))
    if not uppers:
        uppers = [CdfPoint(rz.lo, 1.0, 0.0)]
    if not lowers:
        lowers = [CdfPoint(rz.hi, 0.0, 0.0)]
    mid = 0.5 * (rz.lo + rz.hi)
    # Ties at the midpoint are frequent once lines clip there, so fall back
    # to the anchor value (tightest near the anchored end), then the slope.
    up = min(uppers, key=lambda c: (upper_at(c, mid), c.f, c.s))
    low = max(lowers, key=lambda c: (lower_at(c, mid), c.f, -c.s))
    try:
        return repair_dominance(PboxInterval(up, low))
    except Inconsistent:
        return convex_interval(rz.lo, rz.hi)


# -- model construction -------------------------------------------------------


@dataclass
class ModelVars:
    """Variable ids of one built scheduling network."""

    order: list[int] = field(default_factory=list)
    stock: list[int] = field(default_factory=list)
    demand: list[int] = field(default_factory=list)
    order_cost: list[int] = field(default_factory=list)
    cycle_cost: list[int] = field(default_factory=list)
    tc: int = -1
    holding: int = -1
    total_orders: int = -1


class _Chain:
    """Running-sum helper: the first term is the chain itself."""

    def __init__(self, store: DomainStore, label: str):
        self.store = store
        self.label = label
        self.var: int | None = None

    def extend(self, term: int) -> int:
        store = self.store
        if self.var is None:
            self.var = term
            return term
        binding = combine_bindings(
            "add", store.domains[self.var], store.domains[term]
        )
        acc = store.new_var(binding, name=f"{self.label}{len(store.domains)}")
        store.post(Constraint("add", (self.var, term, acc)))
        self.var = acc
        return acc


def build_model(
    inst: InventoryInstance, schedule, mode: str = "pbox", order_sizes=None
) -> tuple[DomainStore, ModelVars]:
    """Constraint network for one (possibly partially decided) schedule.

    ``schedule`` holds one entry per cycle: True forces an order in
    [x_min, x_max], False forces none, None leaves the decision open with the
    relaxed order range [0, x_max].  With ``order_sizes`` the order variables
    are pinned to those quantities instead.  Flow balance, non-negative stock
    and the cost sums are posted; two redundant aggregates (total orders tied
    to total demand, and the purchase part of the cost tied to total orders)
    sharpen the cost lower bound used for pruning.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if len(schedule) != inst.horizon:
        raise ValueError(f"schedule length {len(schedule)} != horizon {inst.horizon}")
    if order_sizes is not None and len(order_sizes) != inst.horizon:
        raise ValueError("order_sizes length must match the horizon")

    store = DomainStore()
    mv = ModelVars()

    a_bind = _domain_of(inst.ordering_cost, mode)
    h_bind = _domain_of(inst.holding_cost, mode)
    v_bind = _domain_of(inst.unit_cost, mode)
    hvar = store.new_var(h_bind, name="h")
    vvar = store.new_var(v_bind, name="v")
    i0var = store.new_var(point_mass(inst.initial_stock), name="stock0")

    order_sum = _Chain(store, "orders_thru")
    demand_sum = _Chain(store, "demand_thru")
    acost_sum = _Chain(store, "ordering_thru")
    hold_sum = _Chain(store, "holding_thru")
    purchase_sum = _Chain(store, "purchase_thru")

    prev_stock = i0var
    for t in range(inst.horizon):
        cyc = t + 1
        d_t = store.new_var(_domain_of(inst.demands[t], mode), name=f"demand{cyc}")
        mv.demand.append(d_t)

        decided = schedule[t]
        if decided is True:
            x_dom = (
                point_mass(order_sizes[t])
                if order_sizes is not None
                else convex_interval(inst.x_min, inst.x_max)
            )
            a_dom = a_bind
        elif decided is False:
            x_dom = point_mass(0.0)
            a_dom = point_mass(0.0)
        else:
            x_dom = convex_interval(0.0, inst.x_max)
            a_dom = convex_interval(0.0, a_bind.hi.q)
        x_t = store.new_var(x_dom, name=f"order{cyc}")
        a_t = store.new_var(a_dom, name=f"ordering_cost{cyc}")
        mv.order.append(x_t)
        mv.order_cost.append(a_t)

        # stock balance: stock_t = stock_{t-1} + order_t - demand_t, >= 0
        b_bind = combine_bindings(
            "add", store.domains[prev_stock], store.domains[x_t]
        )
        b_t = store.new_var(b_bind, name=f"supply{cyc}")
        store.post(Constraint("add", (prev_stock, x_t, b_t)))

        i_bind = combine_bindings("sub", b_bind, store.domains[d_t])
        if i_bind.hi.q < 0.0:
            store.fail()
            return store, mv
        if i_bind.lo.q < 0.0:
            i_bind = slide(i_bind, QuantileInterval(0.0, i_bind.hi.q))
        i_t = store.new_var(i_bind, name=f"stock{cyc}")
        store.post(Constraint("sub", (b_t, d_t, i_t)))
        mv.stock.append(i_t)

        hold_t = store.new_var(
            combine_bindings("mul", h_bind, i_bind), name=f"holding_cost{cyc}"
        )
        store.post(Constraint("mul", (hvar, i_t, hold_t)))
        buy_t = store.new_var(
            combine_bindings("mul", v_bind, store.domains[x_t]),
            name=f"purchase_cost{cyc}",
        )
        store.post(Constraint("mul", (vvar, x_t, buy_t)))

        fixed_t = store.new_var(
            combine_bindings("add", store.domains[a_t], store.domains[hold_t]),
            name=f"fixed_hold{cyc}",
        )
        store.post(Constraint("add", (a_t, hold_t, fixed_t)))
        cost_t = store.new_var(
            combine_bindings("add", store.domains[fixed_t], store.domains[buy_t]),
            name=f"cost{cyc}",
        )
        store.post(Constraint("add", (fixed_t, buy_t, cost_t)))
        mv.cycle_cost.append(cost_t)

        order_sum.extend(x_t)
        demand_sum.extend(d_t)
        acost_sum.extend(a_t)
        hold_sum.extend(hold_t)
        purchase_sum.extend(buy_t)
        prev_stock = i_t

    # Conservation closure: total orders = total demand + (final - initial stock).
    # Redundant for single solutions but it lifts the purchase-cost floor that
    # per-cycle domains cannot see.
    drained = store.new_var(
        combine_bindings("sub", store.domains[prev_stock], store.domains[i0var]),
        name="net_stock_gain",
    )
    store.post(Constraint("sub", (prev_stock, i0var, drained)))
    store.post(Constraint("add", (demand_sum.var, drained, order_sum.var)))
    store.post(Constraint("mul", (vvar, order_sum.var, purchase_sum.var)))

    # Orders must be able to meet demand up to the next replenishment, so the
    # total ordered quantity is floored by worst-case total demand.
    worst_total = sum(_quantile_high(d) for d in inst.demands) - inst.initial_stock
    tx_dom = store.domains[order_sum.var]
    if worst_total > tx_dom.lo.q:
        if worst_total > tx_dom.hi.q:
            store.fail()
            return store, mv
        store.tighten(order_sum.var, (worst_total, tx_dom.hi.q))

    overhead = store.new_var(
        combine_bindings(
            "add", store.domains[acost_sum.var], store.domains[hold_sum.var]
        ),
        name="ordering_plus_holding",
    )
    store.post(Constraint("add", (acost_sum.var, hold_sum.var, overhead)))
    tc = store.new_var(
        combine_bindings(
            "add", store.domains[overhead], store.domains[purchase_sum.var]
        ),
        name="total_cost",
    )
    store.post(Constraint("add", (overhead, purchase_sum.var, tc)))

    mv.tc = tc
    mv.holding = hold_sum.var
    mv.total_orders = order_sum.var
    return store, mv


# -- schedule evaluation ------------------------------------------------------


@dataclass(frozen=True)
class CycleDomains:
    order: PboxInterval
    stock: PboxInterval
    demand: PboxInterval

    def to_dict(self) -> dict:
        return {
            "order": self.order.to_dict(),
            "stock": self.stock.to_dict(),
            "demand": self.demand.to_dict(),
        }


@dataclass(frozen=True)
class ScheduleReport:
    """A solved schedule with interval-valued costs and per-cycle domains."""

    schedule: tuple[bool, ...]
    replenishments: int
    tc: PboxInterval
    tc_hull: PboxInterval
    holding: PboxInterval
    cycles: tuple[CycleDomains, ...]
    wall_time_s: float
    stats: dict

    def to_dict(self) -> dict:
        return {
            "schedule": [int(flag) for flag in self.schedule],
            "replenishments": self.replenishments,
            "tc": self.tc.to_dict(),
            "tc_hull": self.tc_hull.to_dict(),
            "holding": self.holding.to_dict(),
            "cycles": [c.to_dict() for c in self.cycles],
            "wall_time_s": self.wall_time_s,
            "stats": dict(self.stats),
        }


def robust_order_sizes(inst: InventoryInstance, schedule) -> list[float] | None:
    """Cheapest order quantities that cover worst-case demand in every cycle.

    Each cycle's worst-case demand is served first from initial stock, then
    from the latest order point with spare capacity, which minimizes holding.
    Returns None when the caps cannot cover some cycle.
    """
    worst = [_quantile_high(d) for d in inst.demands]
    alloc = [0.0] * inst.horizon
    spare = [inst.x_max if flag else 0.0 for flag in schedule]
    stock = inst.initial_stock
    points: list[int] = []
    for t in range(inst.horizon):
        if schedule[t]:
            points.append(t)
        need = worst[t]
        take = min(stock, need)
        stock -= take
        need -= take
        for p in reversed(points):
            if need <= 0.0:
                break
            take = min(spare[p], need)
            alloc[p] += take
            spare[p] -= take
            need -= take
        if need > 1e-12:
            return None
    for t in range(inst.horizon):
        if schedule[t] and alloc[t] < inst.x_min:
            alloc[t] = inst.x_min
    return alloc


def evaluate_schedule(
    inst: InventoryInstance,
    schedule,
    mode: str = "pbox",
    label_orders: bool = True,
) -> ScheduleReport | None:
    """Propagate one fully decided schedule; None when it is infeasible.

    A schedule is feasible when the relaxed network is consistent and the
    order caps can cover worst-case demand in every cycle.  With
    ``label_orders`` the order quantities are then pinned to the cheapest
    covering sizes and the network re-solved, so the reported costs describe
    resolved decisions over the full demand uncertainty rather than the
    relaxation hull.
    """
    started = time.perf_counter()
    schedule = tuple(bool(flag) for flag in schedule)
    store, mv = build_model(inst, schedule, mode=mode)
    if store.propagate() == FAILED:
        return None
    sizes = robust_order_sizes(inst, schedule)
    if sizes is None:
        return None
    tc_hull = store.domains[mv.tc]
    stats = dict(store.stats)
    stats["labeling"] = "hull"
    if label_orders:
        labelled, mv2 = build_model(inst, schedule, mode=mode, order_sizes=sizes)
        if labelled.propagate() == FAILED:  # pragma: no cover - covered orders fit
            return None
        store, mv = labelled, mv2
        stats = dict(store.stats)
        stats["labeling"] = "robust"
    cycles = tuple(
        CycleDomains(
            order=store.domains[mv.order[t]],
            stock=store.domains[mv.stock[t]],
            demand=store.domains[mv.demand[t]],
        )
        for t in range(inst.horizon)
    )
    return ScheduleReport(
        schedule=schedule,
        replenishments=sum(schedule),
        tc=store.domains[mv.tc],
        tc_hull=tc_hull,
        holding=store.domains[mv.holding],
        cycles=cycles,
        wall_time_s=time.perf_counter() - started,
        stats=stats,
    )


# -- search -------------------------------------------------------------------


@dataclass(frozen=True)
class FrontierEntry:
    schedule: tuple[bool, ...]
    replenishments: int
    tc_lo: float
    tc_hi: float

    def to_dict(self) -> dict:
        return {
            "schedule": [int(flag) for flag in self.schedule],
            "replenishments": self.replenishments,
            "tc_lo": self.tc_lo,
            "tc_hi": self.tc_hi,
        }


@dataclass
class SearchResult:
    status: str  # "optimal" or "infeasible"
    best: ScheduleReport | None
    frontier: tuple[FrontierEntry, ...]
    nodes: int
    clones: int
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "best": self.best.to_dict() if self.best is not None else None,
            "frontier": [entry.to_dict() for entry in self.frontier],
            "nodes": self.nodes,
            "clones": self.clones,
            "wall_time_s": self.wall_time_s,
        }


def _schedule_key(tc_lo: float, schedule: tuple[bool, ...]):
    return (tc_lo, sum(schedule), schedule)


class _Searcher:
    """Depth-first branch and bound over the replenishment flags.

    Cycles are decided left to right, the no-order branch first.  The relaxed
    store bounds the cost of every completion from below, so a branch is
    abandoned once that bound exceeds the incumbent's.  Full schedules are
    scored on the resolved store with robust order sizes; schedules whose
    caps cannot cover worst-case demand are infeasible.
    """

    def __init__(self, inst: InventoryInstance, mode: str):
        self.inst = inst
        self.mode = mode
        self.a_bind = _domain_of(inst.ordering_cost, mode)
        self.worst = [_quantile_high(d) for d in inst.demands]
        self.rest_worst = [0.0] * (inst.horizon + 1)
        for t in range(inst.horizon - 1, -1, -1):
            self.rest_worst[t] = self.rest_worst[t + 1] + self.worst[t]
        self._cost_to_go = self._min_future_overhead()
        self.nodes = 0
        self.clones = 0
        self.visited: list[tuple[tuple[bool, ...], float, float]] = []
        self.incumbent_key = None

    def _min_future_overhead(self) -> list[float]:
        # dp[i]: cheapest ordering-plus-holding charge that can cover
        # worst-case demand of cycles i.. with no entry stock; the purchase
        # part is excluded since the total-order floor already prices it.
        n = self.inst.horizon
        a_lo = self.a_bind.lo.q
        h_lo = _quantile_low(self.inst.holding_cost)
        dp = [math.inf] * (n + 1)
        dp[n] = 0.0
        for i in range(n - 1, -1, -1):
            total = 0.0
            hold = 0.0
            for length in range(1, n - i + 1):
                j = i + length - 1
                total += self.worst[j]
                if total > self.inst.x_max:
                    break
                if length > 1:
                    hold += self.worst[j] * (length - 1)
                cand = a_lo + h_lo * hold + dp[i + length]
                if cand < dp[i]:
                    dp[i] = cand
        return dp

    def _greedy_schedule(self) -> list[bool] | None:
        # Densest span packing: order as rarely as the caps allow.
        schedule = [False] * self.inst.horizon
        stock = self.inst.initial_stock
        room = 0.0
        for t in range(self.inst.horizon):
            need = self.worst[t]
            if stock >= need:
                stock -= need
                continue
            need -= stock
            stock = 0.0
            if room >= need:
                room -= need
                continue
            schedule[t] = True
            room = self.inst.x_max - need
            if room < 0.0:
                return None
        return schedule

    def _seed_incumbent(self) -> None:
        schedule = self._greedy_schedule()
        if schedule is None:
            return
        resolved = evaluate_schedule(self.inst, schedule, mode=self.mode)
        if resolved is None:
            return
        self.visited.append(
            (resolved.schedule, resolved.tc.lo.q, resolved.tc.hi.q)
        )
        self.incumbent_key = _schedule_key(resolved.tc.lo.q, resolved.schedule)

    def run(self, prefix: tuple[bool, ...] = ()) -> None:
        store, mv = build_model(self.inst, [None] * self.inst.horizon, mode=self.mode)
        if store.propagate() == FAILED:
            return
        self._seed_incumbent()
        path: list[bool] = []
        for flag in prefix:
            if self._fix(store, mv, len(path), flag, path) == FAILED:
                return
            path.append(flag)
        self._dfs(store, mv, path)

    def _fix(self, store: DomainStore, mv: ModelVars, t: int, on: bool, path=None) -> str:
        if on:
            store.tighten(
                mv.order[t], convex_interval(self.inst.x_min, self.inst.x_max)
            )
            store.tighten(mv.order_cost[t], self.a_bind)
        else:
            store.tighten(mv.order[t], 0.0)
            store.tighten(mv.order_cost[t], 0.0)
            # Orders must meet demand up to the next replenishment, so the
            # stock entering a no-order run covers the run's worst case.
            # This is what prices consolidated holding into the bound.
            if path is not None:
                required = self.worst[t]
                j = t - 1
                while j >= 0 and store.status == CONSISTENT:
                    d = store.domains[mv.stock[j]]
                    if required > d.lo.q:
                        if required > d.hi.q + tolerance():
                            store.fail()
                            break
                        store.tighten(mv.stock[j], (required, max(d.hi.q, required)))
                    if j >= len(path) or path[j]:
                        break
                    required += self.worst[j]
                    j -= 1
        return store.propagate()

    def _coverable(self, path: list[bool]) -> bool:
        # Optimistically order in every undecided cycle; if even that cannot
        # cover worst-case demand the subtree is hopeless.
        rest = self.inst.horizon - len(path)
        return robust_order_sizes(self.inst, path + [True] * rest) is not None

    def _node_bound(self, store: DomainStore, mv: ModelVars, path: list[bool]) -> float:
        # Relaxed total cost plus an admissible floor on future overhead.
        # Cycles up to some split point may be served from carried stock, but
        # a unit consumed at cycle m then sits in stock for m - depth future
        # cycle ends; past the split the static cost-to-go table charges
        # ordering and in-span holding.  Neither part is visible to the
        # relaxed store, whose open cycles hold no stock and no orders.
        depth = len(path)
        bound = store.domains[mv.tc].lo.q
        n = self.inst.horizon
        if self.rest_worst[depth] <= 0.0:
            return bound
        h_lo = _quantile_low(self.inst.holding_cost)
        carry_cost = 0.0
        floor = self._cost_to_go[depth]
        for c in range(depth, n):
            carry_cost += h_lo * (c - depth) * self.worst[c]
            if carry_cost >= floor:
                break
            cand = carry_cost + self._cost_to_go[c + 1]
            if cand < floor:
                floor = cand
        return bound + floor if math.isfinite(floor) else math.inf

    def _dfs(self, store: DomainStore, mv: ModelVars, path: list[bool]) -> None:
        self.nodes += 1
        if store.status == FAILED:
            return
        depth = len(path)
        if (
            self.incumbent_key is not None
            and self._node_bound(store, mv, path)
            > self.incumbent_key[0] + tolerance()
        ):
            return
        if depth == self.inst.horizon:
            schedule = tuple(path)
            resolved = evaluate_schedule(self.inst, schedule, mode=self.mode)
            if resolved is None:
                return
            self.visited.append((schedule, resolved.tc.lo.q, resolved.tc.hi.q))
            key = _schedule_key(resolved.tc.lo.q, schedule)
            if self.incumbent_key is None or key < self.incumbent_key:
                self.incumbent_key = key
            return
        if not self._coverable(path):
            return
        for flag in (False, True):
            child = store.clone()
            self.clones += 1
            if self._fix(child, mv, depth, flag, path) != FAILED:
                path.append(flag)
                self._dfs(child, mv, path)
                path.pop()


def _merge_visited(inst, mode, visited, nodes, clones, started) -> SearchResult:
    if not visited:
        return SearchResult(
            status="infeasible",
            best=None,
            frontier=(),
            nodes=nodes,
            clones=clones,
            wall_time_s=time.perf_counter() - started,
        )
    best_schedule, best_lo, best_hi = min(
        visited, key=lambda item: _schedule_key(item[1], item[0])
    )
    tol = tolerance()
    frontier = tuple(
        FrontierEntry(schedule, sum(schedule), lo, hi)
        for schedule, lo, hi in sorted(
            (
                item
                for item in set(visited)
                if item[1] <= best_hi + tol and item[2] >= best_lo - tol
            ),
            key=lambda item: _schedule_key(item[1], item[0]),
        )
    )
    best = evaluate_schedule(inst, best_schedule, mode=mode)
    return SearchResult(
        status="optimal",
        best=best,
        frontier=frontier,
        nodes=nodes,
        clones=clones,
        wall_time_s=time.perf_counter() - started,
    )


def _subtree_worker(payload: dict) -> dict:
    inst = InventoryInstance.from_dict(payload["instance"])
    searcher = _Searcher(inst, payload["mode"])
    searcher.run(tuple(bool(flag) for flag in payload["prefix"]))
    return {
        "visited": [(list(s), lo, hi) for s, lo, hi in searcher.visited],
        "nodes": searcher.nodes,
        "clones": searcher.clones,
    }


def search(
    inst: InventoryInstance,
    mode: str = "pbox",
    parallel: int = 0,
) -> SearchResult:
    """Best schedule plus the frontier of interval-indistinguishable ones.

    The frontier holds every enumerated feasible schedule whose total-cost
    interval overlaps the incumbent's.  ``parallel`` > 1 farms fixed-prefix
    subtrees out to worker processes; workers prune only locally, so the
    incumbent is identical but the frontier can be a superset of a serial
    run's.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    started = time.perf_counter()
    if parallel and parallel > 1 and inst.horizon > 2:
        depth = min(3, inst.horizon - 1, max(1, parallel.bit_length()))
        prefixes = list(product((False, True), repeat=depth))
        payload = inst.to_dict()
        visited: list[tuple[tuple[bool, ...], float, float]] = []
        nodes = clones = 0
        try:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                results = list(
                    pool.map(
                        _subtree_worker,
                        [
                            {"instance": payload, "mode": mode, "prefix": list(p)}
                            for p in prefixes
                        ],
                    )
                )
        except (OSError, PermissionError):
            results = None
        if results is not None:
            for res in results:
                visited.extend(
                    (tuple(bool(v) for v in s), lo, hi) for s, lo, hi in res["visited"]
                )
                nodes += res["nodes"]
                clones += res["clones"]
            return _merge_visited(inst, mode, visited, nodes, clones, started)
        # fall through to the serial search when no worker pool is available
    searcher = _Searcher(inst, mode)
    searcher.run()
    return _merge_visited(
        inst, mode, searcher.visited, searcher.nodes, searcher.clones, started
    )


# -- benchmark ----------------------------------------------------------------


def generate_demand_observations(cycles: int, rng: random.Random) -> list[ObservationSet]:
    """Reproducible per-cycle demand observations.

    Each cycle draws a base mean uniformly from [20, 40] and observes five
    quantiles at mean plus {-2, -1, 0, 1, 2} times a spread of 0.15 * mean,
    with symmetric counts (1, 2, 3, 2, 1).
    """
    sets = []
    for _ in range(cycles):
        mean = rng.uniform(20.0, 40.0)
        spread = 0.15 * mean
        sets.append(
            ObservationSet(
                tuple(
                    (mean + k * spread, count)
                    for k, count in zip((-2, -1, 0, 1, 2), _DEMAND_COUNTS)
                )
            )
        )
    return sets


def default_instance(
    horizon: int,
    seed: int,
    x_min: float = 1.0,
    x_max: float = DEFAULT_X_MAX,
) -> InventoryInstance:
    rng = random.Random(seed * 1_000_003 + horizon)
    return InventoryInstance(
        horizon=horizon,
        ordering_cost=DEFAULT_ORDERING_COST,
        holding_cost=DEFAULT_HOLDING_COST,
        unit_cost=DEFAULT_UNIT_COST,
        demands=tuple(generate_demand_observations(horizon, rng)),
        initial_stock=0.0,
        x_min=x_min,
        x_max=x_max,
    )


def _containment_fields(inst: InventoryInstance, best: ScheduleReport) -> dict:
    """Evaluate the winning schedule under the convex representation and
    compare the total-cost quantile intervals."""
    convex = evaluate_schedule(inst, best.schedule, mode="convex")
    tol = tolerance()
    out = {"convex_feasible": convex is not None}
    if convex is None:  # pragma: no cover - convex relaxation cannot be tighter
        out["hull_contained"] = False
        return out
    out["convex_tc_hull"] = convex.tc_hull.to_dict()
    out["hull_contained"] = (
        convex.tc_hull.lo.q <= best.tc_hull.lo.q + tol
        and best.tc_hull.hi.q <= convex.tc_hull.hi.q + tol
    )
    out["resolved_contained"] = (
        convex.tc.lo.q <= best.tc.lo.q + tol and best.tc.hi.q <= convex.tc.hi.q + tol
    )
    mid = 0.5 * (best.tc.lo.q + best.tc.hi.q)
    f_low, f_up = project(best.tc, mid)
    out["tc_mid_cdf_bounds"] = [f_low, f_up]
    out["cdf_tighter_than_convex"] = f_low > tol and f_up < 1.0 - tol
    return out


def run_benchmark(
    horizons,
    seed: int = 42,
    model: str = "pbox",
    x_min: float = 1.0,
    x_max: float = DEFAULT_X_MAX,
    parallel: int = 0,
    instance: InventoryInstance | None = None,
) -> dict:
    """Timed search runs over seeded instances, one row per horizon.

    Rows record wall time and allocation counters (domain writes and store
    clones stand in for heap metrics).  Under the p-box model each row also
    carries the convex evaluation of the winning schedule and containment
    checks of the total-cost intervals.
    """
    if model not in MODES:
        raise ValueError(f"model must be one of {MODES}, got {model!r}")
    rows = []
    for horizon in horizons:
        inst = (
            instance
            if instance is not None
            else default_instance(int(horizon), seed, x_min=x_min, x_max=x_max)
        )
        started = time.perf_counter()
        result = search(inst, mode=model, parallel=parallel)
        elapsed = time.perf_counter() - started
        row = {
            "horizon": inst.horizon,
            "model": model,
            "seed": seed,
            "status": result.status,
            "nodes": result.nodes,
            "alloc_counters": {
                "store_clones": result.clones,
                "domain_writes": (
                    result.best.stats["prunes"] if result.best is not None else 0
                ),
            },
            "frontier": [entry.to_dict() for entry in result.frontier],
            "timing": {"wall_time_s": elapsed},
        }
        if result.best is not None:
            row["best"] = result.best.to_dict()
            if model == "pbox":
                row["containment"] = _containment_fields(inst, result.best)
        rows.append(row)
    return {
        "model": model,
        "seed": seed,
        "horizons": [int(h) for h in horizons],
        "x_min": x_min,
        "x_max": x_max,
        "rows": rows,
    }
