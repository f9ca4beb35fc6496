"""Exact inference: enumeration oracle, variable elimination, opportunity tables.

Two independent routes compute the same quantities. ``brute_*`` functions
enumerate every joint assignment with plain dictionary lookups; they are the
reference implementation and deliberately share no code with the factor
machinery. ``eliminate`` is the production path: factor products with a
min-degree elimination ordering. Tests hold the two within 1e-9 of each
other on randomized networks.

All operations are pure functions of immutable inputs.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import IncompleteAssignment, ZeroEvidenceProbability
from .network import Assignment, FeoScenario, Network, check_assignment

AGREEMENT_TOLERANCE = 1e-9


# --- brute-force oracle -------------------------------------------------------

def joint_probability(network: Network, full: Assignment) -> float:
    """Probability of one complete assignment: the product of CPT lookups."""
    check_assignment(network, full)
    missing = set(network.names) - set(full)
    if missing:
        raise IncompleteAssignment(f"assignment misses {sorted(missing)}")
    p = 1.0
    for name in network.topological_order:
        cpt = network.cpts[name]
        key = tuple(full[par] for par in cpt.parents)
        idx = network.variable(name).states.index(full[name])
        p *= cpt.row(key)[idx]
    return p


def _completions(network: Network, partial: Assignment):
    free = [n for n in network.topological_order if n not in partial]
    state_lists = [network.variable(n).states for n in free]
    for combo in itertools.product(*state_lists):
        full = dict(partial)
        full.update(zip(free, combo))
        yield full


def brute_marginal(network: Network, query: Assignment) -> float:
    """Reference marginal: sum of joint_probability over all completions."""
    check_assignment(network, query)
    return sum(joint_probability(network, full) for full in _completions(network, query))


def brute_conditional(network: Network, target: Assignment, evidence: Assignment) -> float:
    pe = brute_marginal(network, evidence)
    if pe <= 0.0:
        raise ZeroEvidenceProbability(f"evidence {dict(evidence)} has probability 0")
    both = dict(evidence)
    both.update(target)
    return brute_marginal(network, both) / pe


# --- factors and variable elimination ----------------------------------------

@dataclass(frozen=True)
class Factor:
    """Nonnegative table over the joint state space of ``scope``.

    ``values`` is a dense ndarray whose axes follow ``scope`` order.
    """

    scope: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != len(self.scope):
            raise ValueError("factor rank does not match scope")
        if np.any(self.values < 0):
            raise ValueError("factor entries must be nonnegative")

    def multiply(self, other: "Factor") -> "Factor":
        scope = self.scope + tuple(v for v in other.scope if v not in self.scope)
        a = _expand(self, scope)
        b = _expand(other, scope)
        return Factor(scope, a * b)

    def marginalize(self, name: str) -> "Factor":
        axis = self.scope.index(name)
        return Factor(self.scope[:axis] + self.scope[axis + 1:], self.values.sum(axis=axis))

    def normalized(self) -> "Factor":
        total = self.values.sum()
        if total <= 0:
            raise ZeroEvidenceProbability("factor normalizes to zero")
        return Factor(self.scope, self.values / total)


def _expand(factor: Factor, scope: Sequence[str]) -> np.ndarray:
    shape = [1] * len(scope)
    src_axes = [scope.index(v) for v in factor.scope]
    perm = np.argsort(src_axes)
    arr = np.transpose(factor.values, perm)
    for ax, size in zip(sorted(src_axes), arr.shape):
        shape[ax] = size
    return arr.reshape(shape)


def _cpt_factor(network: Network, name: str, evidence: Assignment) -> Factor:
    """The CPT of ``name`` as a factor, with evidence rows/columns selected out."""
    cpt = network.cpts[name]
    scope_full = cpt.parents + (name,)
    shape = tuple(network.variable(v).cardinality for v in scope_full)
    values = np.empty(shape)
    parent_states = [network.variable(p).states for p in cpt.parents]
    for combo_idx in itertools.product(*(range(len(s)) for s in parent_states)):
        key = tuple(parent_states[i][combo_idx[i]] for i in range(len(cpt.parents)))
        values[combo_idx] = cpt.row(key)
    factor = Factor(scope_full, values)
    for v in scope_full:
        if v in evidence:
            axis = factor.scope.index(v)
            idx = network.variable(v).states.index(evidence[v])
            values = np.take(factor.values, [idx], axis=axis)
            factor = Factor(factor.scope, values)
    return factor


def eliminate(network: Network, keep: Iterable[str], evidence: Assignment | None = None) -> Factor:
    """Factor over ``keep`` proportional to the evidence-restricted joint.

    Evidence variables are restricted (their axes collapse to size one),
    every other variable outside ``keep`` is summed out using a greedy
    min-degree ordering. Exact on any DAG; the ordering only affects cost.
    """
    evidence = dict(evidence or {})
    check_assignment(network, evidence)
    keep = list(keep)
    overlap = set(keep) & set(evidence)
    if overlap:
        raise ValueError(f"keep and evidence overlap: {sorted(overlap)}")
    factors = [_cpt_factor(network, name, evidence) for name in network.topological_order]
    to_eliminate = set(network.names) - set(keep) - set(evidence)
    while to_eliminate:
        # min-degree: eliminate the variable appearing with the fewest neighbours
        def degree(v):
            neigh = set()
            for f in factors:
                if v in f.scope:
                    neigh.update(f.scope)
            return len(neigh - {v})
        var = min(sorted(to_eliminate), key=degree)
        to_eliminate.discard(var)
        related = [f for f in factors if var in f.scope]
        rest = [f for f in factors if var not in f.scope]
        if related:
            prod = related[0]
            for f in related[1:]:
                prod = prod.multiply(f)
            rest.append(prod.marginalize(var))
        factors = rest
    result = factors[0]
    for f in factors[1:]:
        result = result.multiply(f)
    # collapse evidence axes (size one) and order axes by `keep`
    for v in list(result.scope):
        if v in evidence:
            result = Factor(
                tuple(s for s in result.scope if s != v),
                result.values.sum(axis=result.scope.index(v)),
            )
    perm = [result.scope.index(v) for v in keep]
    return Factor(tuple(keep), np.transpose(result.values, perm) if keep else result.values)


def marginal(network: Network, query: Assignment) -> float:
    """P(query), computed by elimination (enumeration-checked in tests)."""
    check_assignment(network, query)
    if not query:
        return 1.0
    factor = eliminate(network, [], evidence=query)
    return float(factor.values)


def conditional(network: Network, target: Assignment, evidence: Assignment) -> float:
    """P(target | evidence) = P(target, evidence) / P(evidence)."""
    pe = marginal(network, evidence)
    if pe <= 0.0:
        raise ZeroEvidenceProbability(f"evidence {dict(evidence)} has probability 0")
    both = dict(evidence)
    for k, v in target.items():
        if k in both and both[k] != v:
            return 0.0
        both[k] = v
    return marginal(network, both) / pe


# --- opportunity tables -------------------------------------------------------

@dataclass(frozen=True)
class TableRow:
    justified: tuple[tuple[str, str], ...]
    sensitive: tuple[tuple[str, str], ...] | None  # None marks the anchor row
    target_state: str
    probability: float


@dataclass(frozen=True)
class ConditionalTable:
    """P(target | justified, sensitive) rows plus P(target | justified) anchors."""

    justified_vars: tuple[str, ...]
    sensitive_vars: tuple[str, ...]
    target: str
    rows: tuple[TableRow, ...]

    def lookup(self, justified: Assignment, sensitive: Assignment | None, state: str) -> float:
        want_j = tuple(sorted(justified.items()))
        want_s = None if sensitive is None else tuple(sorted(sensitive.items()))
        for row in self.rows:
            if (tuple(sorted(row.justified)) == want_j
                    and (None if row.sensitive is None else tuple(sorted(row.sensitive))) == want_s
                    and row.target_state == state):
                return row.probability
        raise KeyError((justified, sensitive, state))

    def to_csv(self) -> str:
        """CSV layout: justified columns, sensitive columns (`*` on anchor rows),
        target state, probability."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.justified_vars) + list(self.sensitive_vars)
                        + [self.target, "probability"])
        for row in self.rows:
            jvals = dict(row.justified)
            svals = dict(row.sensitive) if row.sensitive is not None else {}
            writer.writerow(
                [jvals[v] for v in self.justified_vars]
                + [svals.get(v, "*") for v in self.sensitive_vars]
                + [row.target_state, repr(row.probability)]
            )
        return buf.getvalue()


def _role_assignments(network: Network, names: Sequence[str]):
    state_lists = [network.variable(n).states for n in names]
    for combo in itertools.product(*state_lists):
        yield tuple(zip(names, combo))


def feo_table(scenario: FeoScenario) -> ConditionalTable:
    """All P(q | j, s) cells plus the P(q | j) anchor rows.

    Raises ZeroEvidenceProbability naming the empty conditioning cell, since
    a silently skipped cell would make downstream deviation checks lie.
    """
    network = scenario.network
    jvars = tuple(sorted(scenario.roles.justified))
    svars = tuple(sorted(scenario.roles.sensitive))
    target = scenario.target
    tstates = network.variable(target).states
    rows: list[TableRow] = []
    for j_items in _role_assignments(network, jvars):
        j = dict(j_items)
        pj = marginal(network, j)
        if pj <= 0.0:
            raise ZeroEvidenceProbability(f"justified cell {j} has probability 0")
        anchor = eliminate(network, [target], evidence=j).normalized()
        for q_idx, q in enumerate(tstates):
            rows.append(TableRow(j_items, None, q, float(anchor.values[q_idx])))
        for s_items in _role_assignments(network, svars):
            s = dict(s_items)
            joint = dict(j)
            joint.update(s)
            pjs = marginal(network, joint)
            if pjs <= 0.0:
                raise ZeroEvidenceProbability(f"conditioning cell {joint} has probability 0")
            cell = eliminate(network, [target], evidence=joint).normalized()
            for q_idx, q in enumerate(tstates):
                rows.append(TableRow(j_items, s_items, q, float(cell.values[q_idx])))
    return ConditionalTable(jvars, svars, target, tuple(rows))


def feo_deviation(scenario: FeoScenario, table: ConditionalTable | None = None) -> float:
    """max over (j, s, q) of |P(q|j,s) - P(q|j)|; zero iff opportunity holds exactly."""
    table = table if table is not None else feo_table(scenario)
    anchors: dict[tuple, float] = {}
    for row in table.rows:
        if row.sensitive is None:
            anchors[(row.justified, row.target_state)] = row.probability
    dev = 0.0
    for row in table.rows:
        if row.sensitive is None:
            continue
        dev = max(dev, abs(row.probability - anchors[(row.justified, row.target_state)]))
    return dev
