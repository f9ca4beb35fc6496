"""Immutable discrete Bayesian networks and fairness role assignments.

A network is a DAG of categorical variables, each with a conditional
probability table (CPT) indexed by the joint assignment of its parents.
State labels are ordered; the first state of every variable is the
reference state used in reports and in the solver's parametrization.

CPT rows must sum to one within ``CPT_TOLERANCE``. Construction refuses to
renormalize: a row that is off by more than the tolerance is a data bug the
caller has to fix, not something to patch up silently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import (
    ControlIsSensitive,
    CycleDetected,
    DanglingEdge,
    DuplicateName,
    MalformedCpt,
    RoleOverlap,
    TargetMissing,
    UnknownFreeEntry,
)

CPT_TOLERANCE = 1e-9
FORMAT_VERSION = 1

# A (partial) assignment maps variable names to state labels.
Assignment = Mapping[str, str]

# A parent row key is the tuple of parent state labels in declared order.
RowKey = tuple[str, ...]

# A free CPT coordinate: (parent row, owner state label).
Coord = tuple[RowKey, str]


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        if len(self.states) < 2:
            raise MalformedCpt(f"variable {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise DuplicateName(f"variable {self.name!r} has repeated state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class Cpt:
    """One variable's distribution per joint parent assignment.

    ``table`` maps each parent row (tuple of parent state labels, in the
    declared parent order) to a probability vector over the owner's states.
    """

    owner: str
    parents: tuple[str, ...]
    table: Mapping[RowKey, tuple[float, ...]]

    def row(self, key: RowKey) -> tuple[float, ...]:
        return self.table[key]


@dataclass(frozen=True)
class Network:
    variables: tuple[Variable, ...]
    edges: tuple[tuple[str, str], ...]
    cpts: Mapping[str, Cpt]
    _order: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        order = _check_network(self.variables, self.edges, self.cpts)
        object.__setattr__(self, "_order", order)

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def parents(self, name: str) -> tuple[str, ...]:
        return self.cpts[name].parents

    def with_cpt(self, cpt: Cpt) -> "Network":
        """Return a new network with one CPT replaced; everything else shared."""
        cpts = dict(self.cpts)
        cpts[cpt.owner] = cpt
        return Network(self.variables, self.edges, cpts)

    def to_document(self) -> dict:
        """Serialize to the versioned network-spec document format."""
        return {
            "format_version": FORMAT_VERSION,
            "variables": [{"name": v.name, "states": list(v.states)} for v in self.variables],
            "edges": [list(e) for e in self.edges],
            "cpts": [
                {
                    "owner": c.owner,
                    "parents": list(c.parents),
                    "rows": [
                        {"given": dict(zip(c.parents, key)), "p": list(vec)}
                        for key, vec in c.table.items()
                    ],
                }
                for c in (self.cpts[v.name] for v in self.variables)
            ],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))


def parent_rows(network: Network, name: str) -> list[RowKey]:
    """All parent rows of ``name``'s CPT, lexicographic in declared parent order."""
    parents = network.parents(name)
    rows: list[RowKey] = [()]
    for p in parents:
        states = network.variable(p).states
        rows = [r + (s,) for r in rows for s in states]
    return rows


def _toposort(names: Sequence[str], edges: Iterable[tuple[str, str]]) -> tuple[str, ...]:
    children: dict[str, list[str]] = {n: [] for n in names}
    indeg: dict[str, int] = {n: 0 for n in names}
    for a, b in edges:
        children[a].append(b)
        indeg[b] += 1
    ready = [n for n in names if indeg[n] == 0]
    order: list[str] = []
    while ready:
        # declaration order breaks ties, so the ordering is deterministic
        n = ready.pop(0)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort(key=list(names).index)
    if len(order) != len(names):
        stuck = sorted(set(names) - set(order))
        raise CycleDetected(f"edges form a cycle through {', '.join(stuck)}")
    return tuple(order)


def _check_network(variables, edges, cpts) -> tuple[str, ...]:
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateName(f"duplicate variable name(s): {', '.join(dupes)}")
    declared = set(names)
    for a, b in edges:
        for end in (a, b):
            if end not in declared:
                raise DanglingEdge(f"edge ({a} -> {b}) references unknown variable {end!r}")
    if len(set(edges)) != len(edges):
        raise DuplicateName("duplicate edge")
    order = _toposort(names, edges)

    in_edges: dict[str, list[str]] = {n: [] for n in names}
    for a, b in edges:
        in_edges[b].append(a)
    by_name = {v.name: v for v in variables}
    for v in variables:
        if v.name not in cpts:
            raise MalformedCpt(f"variable {v.name!r} has no CPT")
        cpt = cpts[v.name]
        if cpt.owner != v.name:
            raise MalformedCpt(f"CPT owner {cpt.owner!r} does not match variable {v.name!r}")
        if list(cpt.parents) != in_edges[v.name]:
            raise MalformedCpt(
                f"CPT of {v.name!r} declares parents {list(cpt.parents)} "
                f"but in-edges are {in_edges[v.name]} (order matters)"
            )
        expected_rows = 1
        for p in cpt.parents:
            expected_rows *= by_name[p].cardinality
        if len(cpt.table) != expected_rows:
            raise MalformedCpt(
                f"CPT of {v.name!r} has {len(cpt.table)} rows, expected {expected_rows}"
            )
        for key, vec in cpt.table.items():
            if len(key) != len(cpt.parents):
                raise MalformedCpt(f"CPT of {v.name!r}: row key {key} has wrong arity")
            for p, s in zip(cpt.parents, key):
                if s not in by_name[p].states:
                    raise MalformedCpt(f"CPT of {v.name!r}: row {key} names unknown state {s!r} of {p!r}")
            if len(vec) != v.cardinality:
                raise MalformedCpt(f"CPT of {v.name!r}: row {key} has {len(vec)} entries, expected {v.cardinality}")
            for x in vec:
                if not (0.0 <= x <= 1.0):
                    raise MalformedCpt(f"CPT of {v.name!r}: row {key} entry {x} outside [0, 1]")
            s = sum(vec)
            if abs(s - 1.0) > CPT_TOLERANCE:
                raise MalformedCpt(f"CPT of {v.name!r}: row {key} sums to {s!r}, not 1")
    return order


# --- document parsing -------------------------------------------------------

def build_network(doc: Mapping) -> Network:
    """Build a validated Network from a network-spec document (see README)."""
    if doc.get("format_version") != FORMAT_VERSION:
        raise MalformedCpt(f"unsupported format_version {doc.get('format_version')!r}")
    variables = tuple(
        Variable(d["name"], tuple(str(s) for s in d["states"])) for d in doc["variables"]
    )
    edges = tuple((str(a), str(b)) for a, b in doc["edges"])
    by_name = {v.name: v for v in variables}
    cpts: dict[str, Cpt] = {}
    for cd in doc["cpts"]:
        owner = cd["owner"]
        if owner not in by_name:
            raise DanglingEdge(f"CPT owner {owner!r} is not a declared variable")
        parents = tuple(cd.get("parents", ()))
        table: dict[RowKey, tuple[float, ...]] = {}
        for row in cd["rows"]:
            given = row.get("given", {})
            missing = [p for p in parents if p not in given]
            if missing:
                raise MalformedCpt(f"CPT of {owner!r}: row is missing parent(s) {missing}")
            key = tuple(str(given[p]) for p in parents)
            if key in table:
                raise MalformedCpt(f"CPT of {owner!r}: duplicate row for {key}")
            table[key] = tuple(float(x) for x in row["p"])
        cpts[owner] = Cpt(owner, parents, table)
    missing = [v.name for v in variables if v.name not in cpts]
    if missing:
        raise MalformedCpt(f"no CPT given for {', '.join(missing)}")
    return Network(variables, edges, cpts)


@dataclass(frozen=True)
class Finding:
    """One violated invariant, with coordinates naming the offending element."""

    code: str
    where: str
    detail: str

    def __str__(self):
        return f"{self.code} at {self.where}: {self.detail}"


def validate(doc_or_network) -> list[Finding]:
    """Diagnostic check; returns every violated invariant instead of raising.

    Accepts either a raw network-spec document or an already-built Network
    (the latter trivially yields an empty report, since construction
    enforces the same invariants).
    """
    if isinstance(doc_or_network, Network):
        return []
    doc = doc_or_network
    findings: list[Finding] = []
    try:
        build_network(doc)
        return findings
    except Exception:
        pass  # fall through to itemized checks

    if doc.get("format_version") != FORMAT_VERSION:
        findings.append(Finding("bad-format-version", "$", repr(doc.get("format_version"))))
        return findings
    names = [d["name"] for d in doc.get("variables", [])]
    for n in sorted({n for n in names if names.count(n) > 1}):
        findings.append(Finding("duplicate-name", n, "variable declared more than once"))
    declared = set(names)
    for d in doc.get("variables", []):
        if len(d.get("states", [])) < 2:
            findings.append(Finding("too-few-states", d["name"], f"{len(d.get('states', []))} state(s)"))
        ss = [str(s) for s in d.get("states", [])]
        if len(set(ss)) != len(ss):
            findings.append(Finding("duplicate-name", d["name"], "repeated state labels"))
    edges = [tuple(e) for e in doc.get("edges", [])]
    for a, b in edges:
        for end in (a, b):
            if end not in declared:
                findings.append(Finding("dangling-edge", f"{a}->{b}", f"unknown variable {end!r}"))
    try:
        _toposort(names, [e for e in edges if e[0] in declared and e[1] in declared])
    except CycleDetected as exc:
        findings.append(Finding("cycle-detected", "edges", str(exc)))
    states = {d["name"]: [str(s) for s in d.get("states", [])] for d in doc.get("variables", [])}
    for cd in doc.get("cpts", []):
        owner = cd.get("owner", "?")
        for row in cd.get("rows", []):
            key = tuple(str(row.get("given", {}).get(p, "?")) for p in cd.get("parents", ()))
            vec = [float(x) for x in row.get("p", [])]
            for x in vec:
                if not (0.0 <= x <= 1.0):
                    findings.append(Finding("entry-out-of-range", f"{owner}{key}", f"entry {x}"))
            s = sum(vec)
            if abs(s - 1.0) > CPT_TOLERANCE:
                findings.append(Finding("row-sum", f"{owner}{key}", f"sum={s}"))
            if owner in states and vec and len(vec) != len(states[owner]):
                findings.append(Finding("row-arity", f"{owner}{key}", f"{len(vec)} entries"))
    if not findings:
        findings.append(Finding("invalid", "$", "document failed to build; see build_network error"))
    return findings


# --- roles -------------------------------------------------------------------

@dataclass(frozen=True)
class RoleAssignment:
    """Partition of the variables into justified / sensitive / other / ignored,
    plus the control and target designations within `other`."""

    justified: frozenset[str]
    sensitive: frozenset[str]
    other: frozenset[str]
    control: str
    target: str
    ignored: frozenset[str] = frozenset()

    @staticmethod
    def from_document(doc: Mapping) -> "RoleAssignment":
        if doc.get("format_version") != FORMAT_VERSION:
            raise TargetMissing(f"unsupported format_version {doc.get('format_version')!r}")
        return RoleAssignment(
            justified=frozenset(doc.get("justified", ())),
            sensitive=frozenset(doc.get("sensitive", ())),
            other=frozenset(doc.get("other", ())),
            control=doc["control"],
            target=doc["target"],
            ignored=frozenset(doc.get("ignored", ())),
        )

    def check_against(self, network: Network) -> None:
        names = set(network.names)
        groups = {
            "justified": self.justified,
            "sensitive": self.sensitive,
            "other": self.other,
        }
        for label, group in groups.items():
            unknown = group - names
            if unknown:
                raise TargetMissing(f"{label} names unknown variable(s): {sorted(unknown)}")
        # ignored variables are dropped at intake, before the network is
        # built; one still present here would be a dead node we refuse to carry
        still_here = self.ignored & names
        if still_here:
            raise RoleOverlap(
                f"ignored variable(s) {sorted(still_here)} are still in the network; "
                "drop them from the schema/spec instead")
        for la, lb in (("justified", "sensitive"), ("justified", "other"),
                       ("sensitive", "other")):
            overlap = groups[la] & groups[lb]
            if overlap:
                raise RoleOverlap(f"{sorted(overlap)} in both {la} and {lb}")
        covered = self.justified | self.sensitive | self.other
        if covered != names:
            raise RoleOverlap(f"roles do not cover variable(s): {sorted(names - covered)}")
        if not self.justified or not self.sensitive:
            raise RoleOverlap("justified and sensitive sets must be nonempty")
        if self.control in self.sensitive:
            raise ControlIsSensitive(f"control {self.control!r} is a sensitive variable")
        if self.control not in self.other:
            raise ControlIsSensitive(f"control {self.control!r} must belong to `other`")
        if self.target not in self.other:
            raise TargetMissing(f"target {self.target!r} must belong to `other`")
        if self.control == self.target:
            raise TargetMissing("control and target must differ")


@dataclass(frozen=True)
class FeoScenario:
    """A network plus roles plus the set of editable CPT coordinates of the
    control variable.

    ``free_entries`` holds (parent row, state label) coordinates. The
    reference (first) state of a row is never listed: it absorbs whatever
    probability mass the remaining entries leave, which is what keeps the
    constraint system linear in one coordinate per non-reference state.
    """

    network: Network
    roles: RoleAssignment
    free_entries: frozenset[Coord]

    @property
    def control(self) -> str:
        return self.roles.control

    @property
    def target(self) -> str:
        return self.roles.target


def assign_roles(network: Network, roles: RoleAssignment,
                 free_entries: Iterable[Coord] | Iterable[RowKey] | None = None) -> FeoScenario:
    """Bind roles to a network; free entries default to all of C's CPT.

    ``free_entries`` may list (row, state) coordinates or whole rows; whole
    rows expand to every non-reference state of that row. Reference-state
    coordinates are accepted and normalized away (the reference entry is
    always implied by the others).
    """
    roles.check_against(network)
    control = roles.control
    var = network.variable(control)
    rows = set(parent_rows(network, control))
    coords: set[Coord] = set()
    if free_entries is None:
        for r in rows:
            for s in var.states[1:]:
                coords.add((r, s))
    else:
        for entry in free_entries:
            if (isinstance(entry, tuple) and len(entry) == 2
                    and isinstance(entry[0], tuple) and entry[1] in var.states):
                row, state = entry
            else:
                row, state = tuple(entry), None
            if row not in rows:
                raise UnknownFreeEntry(f"{control!r} has no parent row {row}")
            if state is None:
                for s in var.states[1:]:
                    coords.add((row, s))
            elif state == var.states[0]:
                continue  # reference entry is always implied
            else:
                coords.add((row, state))
    return FeoScenario(network=network, roles=roles, free_entries=frozenset(coords))


def check_assignment(network: Network, assignment: Assignment) -> None:
    for name, state in assignment.items():
        var = network.variable(name)  # KeyError on unknown name
        if state not in var.states:
            raise KeyError(f"{state!r} is not a state of {name!r}")
