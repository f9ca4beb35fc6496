"""Linear opportunity-constraint system over the control variable's CPT.

For each assignment j of the justified variables, s of the sensitive
variables, and each non-reference state q of the target, fairness demands
P(q | j) = P(q | j, s). Both sides share the normalization constants P(j)
and P(j, s), which do not depend on the control CPT (summing the control's
states telescopes to one), so the cross-multiplied form

    P(j, s) * P(q, j)  -  P(j) * P(q, j, s)  =  0

is exactly linear in the free CPT entries. Coefficients come from
enumerating joint assignments consistent with each conditioning event and
bucketing the product of every CPT factor except the control's by which
control entry the assignment selects.

Parametrization: one coordinate per free (parent row, non-reference state)
of the control CPT; each row's reference entry absorbs the remaining mass,
so no simplex equality is needed, only per-row caps. Among multiple exact
solutions the solver returns the least-norm one (smallest sum of squared
coordinates), which is deterministic and matches what standard
least-squares linear solvers produce on underdetermined systems.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InfeasibleConstraints, OverfullRow, ZeroEvidenceProbability
from .network import Coord, Cpt, FeoScenario, Network, RowKey, parent_rows

EXACT_RESIDUAL = 1e-8
BOUND_SLACK = 1e-8

_SOLVER = "CLARABEL"


@dataclass(frozen=True)
class ParameterIndex:
    """Ordered free coordinates of the control CPT plus per-row bookkeeping.

    ``coords[k]`` is the (parent row, state label) that θ_k edits.
    ``fixed_mass[row]`` is the total probability pinned by non-free,
    non-reference entries of that row; free coordinates in the row may
    jointly spend at most 1 - fixed_mass.
    """

    control: str
    coords: tuple[Coord, ...]
    fixed_mass: Mapping[RowKey, float]
    theta0: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.coords)

    def rows(self) -> list[RowKey]:
        seen: list[RowKey] = []
        for row, _ in self.coords:
            if row not in seen:
                seen.append(row)
        return seen


def enumerate_free_parameters(scenario: FeoScenario) -> ParameterIndex:
    """Deterministic coordinate ordering: lexicographic by parent row, then state."""
    network = scenario.network
    control = scenario.control
    var = network.variable(control)
    cpt = network.cpts[control]
    state_pos = {s: i for i, s in enumerate(var.states)}
    all_rows = parent_rows(network, control)
    row_pos = {r: i for i, r in enumerate(all_rows)}
    coords = sorted(scenario.free_entries,
                    key=lambda c: (row_pos[c[0]], state_pos[c[1]]))
    fixed_mass: dict[RowKey, float] = {}
    theta0: list[float] = []
    for row in all_rows:
        free_states = {s for (r, s) in coords if r == row}
        mass = sum(cpt.row(row)[state_pos[s]]
                   for s in var.states[1:] if s not in free_states)
        if mass > 1.0 + BOUND_SLACK:
            raise OverfullRow(f"row {row}: fixed entries sum to {mass}")
        fixed_mass[row] = mass
    for row, state in coords:
        theta0.append(cpt.row(row)[state_pos[state]])
    return ParameterIndex(control, tuple(coords), fixed_mass, tuple(theta0))


@dataclass(frozen=True)
class LinearForm:
    """An event probability as an affine function of θ: P = constant + coeffs·θ."""

    coeffs: np.ndarray
    constant: float

    def at(self, theta: np.ndarray) -> float:
        return float(self.constant + self.coeffs @ theta)


@dataclass(frozen=True)
class Equality:
    coeffs: np.ndarray
    rhs: float
    label: str
    justified: tuple[tuple[str, str], ...]
    sensitive: tuple[tuple[str, str], ...]
    target_state: str
    # raw affine pieces, kept for linearity diagnostics: P(q,j) and P(q,j,s)
    pq_j: LinearForm
    pq_js: LinearForm
    p_j: float
    p_js: float


@dataclass(frozen=True)
class Inequality:
    coeffs: np.ndarray
    lower: float | None
    upper: float | None
    constant: float
    label: str


@dataclass(frozen=True)
class FeoSystem:
    scenario: FeoScenario
    index: ParameterIndex
    equalities: tuple[Equality, ...]
    inequalities: tuple[Inequality, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def coefficient_matrix(self) -> np.ndarray:
        if not self.equalities:
            return np.zeros((0, len(self.index)))
        return np.stack([e.coeffs for e in self.equalities])

    @property
    def rhs_vector(self) -> np.ndarray:
        return np.array([e.rhs for e in self.equalities])


@dataclass(frozen=True)
class Solution:
    theta: tuple[float, ...]
    status: str  # exact | closest | infeasible-constraints
    residuals: tuple[float, ...]
    objective: float
    active_constraints: tuple[str, ...] = ()

    def report(self, system: FeoSystem) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "theta": [
                {"row": list(row), "state": state, "value": value}
                for (row, state), value in zip(system.index.coords, self.theta)
            ],
            "residuals": [
                {"label": eq.label, "residual": r}
                for eq, r in zip(system.equalities, self.residuals)
            ],
            "active_constraints": list(self.active_constraints),
        }


class _Linearizer:
    """Joint-assignment enumeration with θ-bucketing for one scenario."""

    def __init__(self, scenario: FeoScenario, index: ParameterIndex):
        network = scenario.network
        control = scenario.control
        names = network.topological_order
        self.names = names
        self.pos = {n: i for i, n in enumerate(names)}
        self.states = {n: network.variable(n).states for n in names}
        grids = itertools.product(*(self.states[n] for n in names))
        self.assignments = [dict(zip(names, combo)) for combo in grids]
        n = len(self.assignments)
        # weight of every assignment excluding the control's own factor
        self.weights = np.ones(n)
        for name in names:
            if name == control:
                continue
            cpt = network.cpts[name]
            sidx = {s: i for i, s in enumerate(self.states[name])}
            for i, a in enumerate(self.assignments):
                key = tuple(a[p] for p in cpt.parents)
                self.weights[i] *= cpt.row(key)[sidx[a[name]]]
        # which control entry each assignment selects
        cpt = network.cpts[control]
        var = network.variable(control)
        sidx = {s: i for i, s in enumerate(var.states)}
        coord_of = {c: k for k, c in enumerate(index.coords)}
        ref_state = var.states[0]
        self.sel_coord = np.full(n, -1)  # θ index, -1 when not a free coordinate
        self.sel_fixed = np.zeros(n)     # multiplier when the entry is pinned
        self.sel_ref_row: list[RowKey | None] = [None] * n
        self.index = index
        free_by_row: dict[RowKey, list[int]] = {}
        for k, (row, state) in enumerate(index.coords):
            free_by_row.setdefault(row, []).append(k)
        self.free_by_row = free_by_row
        for i, a in enumerate(self.assignments):
            row = tuple(a[p] for p in cpt.parents)
            state = a[control]
            if (row, state) in coord_of:
                self.sel_coord[i] = coord_of[(row, state)]
            elif state == ref_state and free_by_row.get(row):
                # reference entry = 1 - fixed mass - sum of the row's free θ;
                # the affine pieces are applied in linearize()
                self.sel_ref_row[i] = row
            else:
                self.sel_fixed[i] = cpt.row(row)[sidx[state]]

    def linearize(self, event: Mapping[str, str]) -> LinearForm:
        coeffs = np.zeros(len(self.index))
        constant = 0.0
        for i, a in enumerate(self.assignments):
            if any(a[k] != v for k, v in event.items()):
                continue
            w = self.weights[i]
            if w == 0.0:
                continue
            k = self.sel_coord[i]
            if k >= 0:
                coeffs[k] += w
            elif self.sel_ref_row[i] is not None:
                row = self.sel_ref_row[i]
                constant += w * (1.0 - self.index.fixed_mass[row])
                for kk in self.free_by_row[row]:
                    coeffs[kk] -= w
            else:
                constant += w * self.sel_fixed[i]
        return LinearForm(coeffs, constant)


def build_feo_system(scenario: FeoScenario,
                     index: ParameterIndex | None = None) -> FeoSystem:
    """One cross-multiplied equality per (j, s, non-reference q)."""
    index = index if index is not None else enumerate_free_parameters(scenario)
    network = scenario.network
    lin = _Linearizer(scenario, index)
    theta0 = np.array(index.theta0)
    jvars = sorted(scenario.roles.justified)
    svars = sorted(scenario.roles.sensitive)
    target = scenario.target
    tstates = network.variable(target).states
    equalities: list[Equality] = []
    for j_combo in itertools.product(*(network.variable(v).states for v in jvars)):
        j = dict(zip(jvars, j_combo))
        p_j = lin.linearize(j).at(theta0)
        if p_j <= 0.0:
            raise ZeroEvidenceProbability(f"justified cell {j} has probability 0")
        for s_combo in itertools.product(*(network.variable(v).states for v in svars)):
            s = dict(zip(svars, s_combo))
            js = dict(j)
            js.update(s)
            p_js = lin.linearize(js).at(theta0)
            if p_js <= 0.0:
                raise ZeroEvidenceProbability(f"conditioning cell {js} has probability 0")
            for q in tstates[1:]:
                ev_qj = dict(j)
                ev_qj[target] = q
                ev_qjs = dict(js)
                ev_qjs[target] = q
                pq_j = lin.linearize(ev_qj)
                pq_js = lin.linearize(ev_qjs)
                coeffs = p_js * pq_j.coeffs - p_j * pq_js.coeffs
                rhs = p_j * pq_js.constant - p_js * pq_j.constant
                label = (f"P({target}={q}|{_fmt(j)}) = P({target}={q}|{_fmt(js)})")
                equalities.append(Equality(
                    coeffs, rhs, label,
                    tuple(sorted(j.items())), tuple(sorted(s.items())), q,
                    pq_j, pq_js, p_j, p_js))
    return FeoSystem(scenario, index, tuple(equalities))


def _fmt(assignment: Mapping[str, str]) -> str:
    return ",".join(f"{k}={v}" for k, v in sorted(assignment.items()))


def linearize_event(system: FeoSystem, event: Mapping[str, str]) -> LinearForm:
    """Affine form of P(event) in θ; used by feasibility constraints and tests."""
    lin = _Linearizer(system.scenario, system.index)
    return lin.linearize(event)


def add_feasibility_constraints(system: FeoSystem,
                                constraints: Sequence[Mapping]) -> FeoSystem:
    """Append marginal equality/interval constraints, linearized the same way.

    Constraint documents: {"event": {var: state, ...}, "op": "eq"|"le"|"ge"|
    "interval", "value": x} (or "low"/"high" for intervals).
    """
    from .network import check_assignment

    lin = _Linearizer(system.scenario, system.index)
    ineqs = list(system.inequalities)
    warnings = list(system.warnings)
    for c in constraints:
        event = dict(c["event"])
        try:
            check_assignment(system.scenario.network, event)
        except KeyError as exc:
            raise ValueError(f"constraint event is malformed: {exc}") from exc
        op = c.get("op", "eq")
        form = lin.linearize(event)
        if op == "eq":
            lower = upper = float(c["value"])
        elif op == "le":
            lower, upper = None, float(c["value"])
        elif op == "ge":
            lower, upper = float(c["value"]), None
        elif op == "interval":
            lower, upper = float(c["low"]), float(c["high"])
            if lower > upper:
                raise InfeasibleConstraints(
                    f"empty interval [{lower}, {upper}] for P({_fmt(event)})",
                    conflicts=[f"P({_fmt(event)}) in [{lower}, {upper}]"])
        else:
            raise ValueError(f"unknown constraint op {op!r}")
        label = f"P({_fmt(event)}) {op} " + (
            f"[{lower},{upper}]" if op == "interval" else str(upper if lower is None else lower))
        if np.max(np.abs(form.coeffs)) < 1e-12:
            value = form.constant
            violated = ((lower is not None and value < lower - BOUND_SLACK)
                        or (upper is not None and value > upper + BOUND_SLACK))
            if violated:
                warnings.append(
                    f"zero-coefficient constraint {label}: event does not depend on θ "
                    f"and its fixed probability {value:.6g} violates the bound")
        ineqs.append(Inequality(form.coeffs, lower, upper, form.constant, label))
    return FeoSystem(system.scenario, system.index, system.equalities,
                     tuple(ineqs), tuple(warnings))


# --- solving -----------------------------------------------------------------

def _cvx_constraints(system: FeoSystem, t):
    import cvxpy as cp

    index = system.index
    cons = [t >= 0, t <= 1]
    for row in index.rows():
        ks = [k for k, (r, _s) in enumerate(index.coords) if r == row]
        cap = 1.0 - index.fixed_mass[row]
        cons.append(cp.sum(t[ks]) <= cap)
    for iq in system.inequalities:
        expr = iq.constant + iq.coeffs @ t
        if iq.upper is not None:
            cons.append(expr <= iq.upper)
        if iq.lower is not None:
            cons.append(expr >= iq.lower)
    return cons


def _hard_infeasibilities(system: FeoSystem) -> list[str]:
    return [w for w in system.warnings if w.startswith("zero-coefficient")]


def _feasible_region_empty(system: FeoSystem) -> list[str] | None:
    """Cheap feasibility probe; returns conflict labels when provably empty."""
    import cvxpy as cp

    n = len(system.index)
    t = cp.Variable(n)
    prob = cp.Problem(cp.Minimize(0), _cvx_constraints(system, t))
    prob.solve(solver=_SOLVER)
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        # name the smallest obviously conflicting subset we can find: try each
        # inequality alone against box+rows
        conflicts = []
        for iq in system.inequalities:
            sub = FeoSystem(system.scenario, system.index, (), (iq,))
            t2 = cp.Variable(n)
            p2 = cp.Problem(cp.Minimize(0), _cvx_constraints(sub, t2))
            p2.solve(solver=_SOLVER)
            if p2.status in ("infeasible", "infeasible_inaccurate"):
                conflicts.append(iq.label)
        return conflicts or [iq.label for iq in system.inequalities]
    return None


def _residuals(system: FeoSystem, theta: np.ndarray) -> np.ndarray:
    if not system.equalities:
        return np.zeros(0)
    return system.coefficient_matrix @ theta - system.rhs_vector


def solve_exact(system: FeoSystem) -> Solution | None:
    """Least-norm θ satisfying every constraint within EXACT_RESIDUAL, or None.

    When the current CPT already satisfies everything, it is returned
    unchanged: no intervention beats a needless one.
    """
    if _hard_infeasibilities(system):
        return None
    theta0 = np.array(system.index.theta0)
    if _feasible_theta(system, theta0) and np.all(np.abs(_residuals(system, theta0)) <= EXACT_RESIDUAL):
        return _make_solution(system, theta0, "exact")
    n = len(system.index)
    if n == 0:
        return None  # nothing to edit and the current CPT already failed above
    A = system.coefficient_matrix
    b = system.rhs_vector
    norms = np.linalg.norm(A, axis=1) if len(system.equalities) else np.zeros(0)
    keep = norms > 1e-300
    if np.any(~keep) and np.any(np.abs(b[~keep]) > EXACT_RESIDUAL):
        return None  # 0·θ = nonzero row: unsatisfiable
    # least-norm solution of the equalities alone; when it already sits in the
    # feasible region it is also the constrained optimum, with no QP needed
    if np.any(keep):
        theta_ln = np.linalg.pinv(A[keep] / norms[keep, None]) @ (b[keep] / norms[keep])
    else:
        theta_ln = np.zeros(n)
    if (np.max(np.abs(_residuals(system, theta_ln)), initial=0.0) <= EXACT_RESIDUAL
            and _feasible_theta(system, theta_ln)):
        return _make_solution(system, np.clip(theta_ln, 0.0, 1.0), "exact")
    import cvxpy as cp

    t = cp.Variable(n)
    cons = _cvx_constraints(system, t)
    if np.any(keep):
        cons.append((A[keep] / norms[keep, None]) @ t == b[keep] / norms[keep])
    prob = cp.Problem(cp.Minimize(cp.sum_squares(t)), cons)
    try:
        prob.solve(solver=_SOLVER)
    except cp.SolverError:
        return None
    if prob.status not in ("optimal", "optimal_inaccurate") or t.value is None:
        return None
    theta = _clip(system, np.asarray(t.value))
    if np.max(np.abs(_residuals(system, theta)), initial=0.0) > EXACT_RESIDUAL:
        return None
    if not _feasible_theta(system, theta):
        return None
    return _make_solution(system, theta, "exact")


def solve_closest(system: FeoSystem) -> Solution:
    """Minimize the summed squared equality residuals over the feasible region."""
    import cvxpy as cp

    hard = _hard_infeasibilities(system)
    if hard:
        raise InfeasibleConstraints("feasibility constraints conflict", conflicts=hard)
    n = len(system.index)
    theta0 = np.array(system.index.theta0)
    if n == 0 or not system.equalities:
        if not _feasible_theta(system, theta0):
            raise InfeasibleConstraints("current CPT violates the feasibility constraints",
                                        conflicts=[iq.label for iq in system.inequalities])
        return _make_solution(system, theta0, "exact")
    A = system.coefficient_matrix
    b = system.rhs_vector
    scale = max(np.max(np.abs(A)), np.max(np.abs(b)), 1e-300)
    t = cp.Variable(n)
    cons = _cvx_constraints(system, t)
    objective = cp.sum_squares((A / scale) @ t - b / scale)
    # deterministic tie-break among objective minimizers: prefer least-norm θ
    prob = cp.Problem(cp.Minimize(objective + 1e-9 * cp.sum_squares(t)), cons)
    try:
        prob.solve(solver=_SOLVER)
    except cp.SolverError as exc:
        raise InfeasibleConstraints(f"solver failed: {exc}") from exc
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        conflicts = _feasible_region_empty(system) or []
        raise InfeasibleConstraints("empty feasible region", conflicts=conflicts)
    if prob.status not in ("optimal", "optimal_inaccurate") or t.value is None:
        raise InfeasibleConstraints(f"solver returned status {prob.status}")
    theta = _clip(system, np.asarray(t.value))
    sol = _make_solution(system, theta, "closest")
    if max(map(abs, sol.residuals), default=0.0) <= EXACT_RESIDUAL:
        sol = _make_solution(system, theta, "exact")
    return sol


def solve(system: FeoSystem, mode: str = "auto") -> Solution | None:
    if mode == "exact":
        return solve_exact(system)
    if mode == "closest":
        return solve_closest(system)
    if mode == "auto":
        found = solve_exact(system)
        return found if found is not None else solve_closest(system)
    raise ValueError(f"unknown mode {mode!r}")


def _clip(system: FeoSystem, theta: np.ndarray) -> np.ndarray:
    theta = np.clip(theta, 0.0, 1.0)
    for row in system.index.rows():
        ks = [k for k, (r, _s) in enumerate(system.index.coords) if r == row]
        cap = 1.0 - system.index.fixed_mass[row]
        total = theta[ks].sum()
        if total > cap and total > 0:
            theta[ks] *= max(cap, 0.0) / total
    return theta


def _feasible_theta(system: FeoSystem, theta: np.ndarray) -> bool:
    if np.any(theta < -BOUND_SLACK) or np.any(theta > 1 + BOUND_SLACK):
        return False
    for row in system.index.rows():
        ks = [k for k, (r, _s) in enumerate(system.index.coords) if r == row]
        if theta[ks].sum() > 1.0 - system.index.fixed_mass[row] + BOUND_SLACK:
            return False
    for iq in system.inequalities:
        v = iq.constant + iq.coeffs @ theta
        if iq.upper is not None and v > iq.upper + BOUND_SLACK:
            return False
        if iq.lower is not None and v < iq.lower - BOUND_SLACK:
            return False
    return True


def _make_solution(system: FeoSystem, theta: np.ndarray, status: str) -> Solution:
    res = _residuals(system, theta)
    active: list[str] = []
    for k, (row, state) in enumerate(system.index.coords):
        if theta[k] <= BOUND_SLACK:
            active.append(f"θ[{_fmt_coord(row, state)}] at lower bound 0")
        if theta[k] >= 1.0 - system.index.fixed_mass[row] - BOUND_SLACK:
            active.append(f"θ[{_fmt_coord(row, state)}] at upper bound")
    for iq in system.inequalities:
        v = iq.constant + iq.coeffs @ theta
        if iq.upper is not None and v >= iq.upper - 1e-6:
            active.append(f"{iq.label} (active)")
        elif iq.lower is not None and v <= iq.lower + 1e-6:
            active.append(f"{iq.label} (active)")
    return Solution(
        theta=tuple(float(x) for x in theta),
        status=status,
        residuals=tuple(float(r) for r in res),
        objective=float(np.sum(res ** 2)),
        active_constraints=tuple(active),
    )


def _fmt_coord(row: RowKey, state: str) -> str:
    return f"{','.join(row) or '()'};{state}"


def apply_solution(scenario: FeoScenario, solution: Solution,
                   index: ParameterIndex | None = None) -> Network:
    """New network with the control CPT rebuilt from θ; reference states absorb."""
    index = index if index is not None else enumerate_free_parameters(scenario)
    network = scenario.network
    control = scenario.control
    var = network.variable(control)
    cpt = network.cpts[control]
    state_pos = {s: i for i, s in enumerate(var.states)}
    theta = dict(zip(index.coords, solution.theta))
    table: dict[RowKey, tuple[float, ...]] = {}
    for row in parent_rows(network, control):
        vec = list(cpt.row(row))
        touched = False
        for s in var.states[1:]:
            if (row, s) in theta:
                vec[state_pos[s]] = theta[(row, s)]
                touched = True
        if touched:
            others = sum(vec[1:])
            vec[0] = max(0.0, 1.0 - others)
        table[row] = tuple(vec)
    new_cpt = Cpt(control, cpt.parents, table)
    return network.with_cpt(new_cpt)  # Network construction re-validates
