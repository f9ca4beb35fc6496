"""Tabular ingestion, discretization, and maximum-likelihood CPT fitting.

The ingest/discretize/fit pipeline is deliberately dumb and auditable:
every transformation (dropped rows, filled cells, computed medians,
uniform-filled CPT rows) is recorded in the dataset's provenance log.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    NonNumericColumn,
    StateMismatch,
    UnparseableValue,
)
from .network import Cpt, Network, Variable

CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # categorical | numeric


@dataclass(frozen=True)
class Dataset:
    columns: tuple[Column, ...]
    records: tuple[tuple, ...]
    provenance: Mapping

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise MissingColumn(name)

    def column_values(self, name: str) -> list:
        i = self.column_index(name)
        return [r[i] for r in self.records]

    def categories(self, name: str) -> list[str]:
        i = self.column_index(name)
        if self.columns[i].kind != CATEGORICAL:
            raise NonNumericColumn(f"{name!r} is not categorical")
        return sorted({r[i] for r in self.records})

    def __len__(self) -> int:
        return len(self.records)


# --- discretization policies ---------------------------------------------------

@dataclass(frozen=True)
class MedianThreshold:
    """value <= median -> low, value > median -> high (ties go low)."""


@dataclass(frozen=True)
class ExplicitThresholds:
    thresholds: tuple[float, ...]

    def __post_init__(self):
        if list(self.thresholds) != sorted(set(self.thresholds)):
            raise ValueError("thresholds must be strictly increasing")


@dataclass(frozen=True)
class LabelMap:
    mapping: Mapping[str, str]


@dataclass(frozen=True)
class Passthrough:
    pass


Rule = MedianThreshold | ExplicitThresholds | LabelMap | Passthrough


@dataclass(frozen=True)
class DiscretizationPolicy:
    rules: Mapping[str, Rule] = field(default_factory=dict)

    @staticmethod
    def from_document(doc: Mapping) -> "DiscretizationPolicy":
        rules: dict[str, Rule] = {}
        for name, spec in doc.items():
            kind = spec.get("rule")
            if kind == "median-threshold":
                rules[name] = MedianThreshold()
            elif kind == "explicit-thresholds":
                rules[name] = ExplicitThresholds(tuple(float(t) for t in spec["thresholds"]))
            elif kind == "label-map":
                rules[name] = LabelMap(dict(spec["map"]))
            elif kind == "passthrough":
                rules[name] = Passthrough()
            else:
                raise ValueError(f"unknown discretization rule {kind!r} for {name!r}")
        return DiscretizationPolicy(rules)


def _bin_labels(n_bins: int) -> list[str]:
    if n_bins == 2:
        return ["low", "high"]
    return [f"b{i}" for i in range(n_bins)]


# --- operations ------------------------------------------------------------------

def ingest_csv(path, schema: Mapping) -> Dataset:
    """Read a CSV restricted to the schema's columns.

    Schema document: {"columns": [{"name", "kind", "source"?, "missing"?}]}.
    ``source`` renames a file column; ``missing`` is either absent (rows with
    an empty cell are dropped and counted) or {"fill": value}.
    """
    cols = schema["columns"]
    columns = tuple(Column(c["name"], c.get("kind", CATEGORICAL)) for c in cols)
    sources = [c.get("source", c["name"]) for c in cols]
    fills = [c.get("missing", {}).get("fill") if isinstance(c.get("missing"), dict) else None
             for c in cols]
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for src in sources:
            if src not in header:
                raise MissingColumn(f"file {path} has no column {src!r}")
        records: list[tuple] = []
        dropped = 0
        filled = 0
        for line_no, raw in enumerate(reader, start=2):
            row = []
            drop = False
            for col, src, fill in zip(columns, sources, fills):
                cell = (raw.get(src) or "").strip()
                if cell == "":
                    if fill is not None:
                        cell = str(fill)
                        filled += 1
                    else:
                        drop = True
                        break
                if col.kind == NUMERIC:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        raise UnparseableValue(
                            f"{path}:{line_no} column {col.name!r}: {cell!r} is not numeric"
                        )
                else:
                    row.append(cell)
            if drop:
                dropped += 1
            else:
                records.append(tuple(row))
    provenance = {
        "source": str(path),
        "rows_kept": len(records),
        "rows_dropped_missing": dropped,
        "cells_filled": filled,
        "transforms": [],
    }
    return Dataset(columns, tuple(records), provenance)


def discretize(data: Dataset, policy: DiscretizationPolicy) -> Dataset:
    """Apply the per-column rules; transformed columns become categorical."""
    columns = list(data.columns)
    matrix = [list(r) for r in data.records]
    log = list(data.provenance.get("transforms", []))
    for name, rule in sorted(policy.rules.items()):
        idx = data.column_index(name)
        col = data.columns[idx]
        values = [row[idx] for row in matrix]
        if isinstance(rule, Passthrough):
            continue
        if isinstance(rule, LabelMap):
            observed = {str(v) for v in values}
            unmapped = observed - set(rule.mapping)
            if unmapped:
                raise StateMismatch(f"{name!r}: label map misses {sorted(unmapped)}")
            for row in matrix:
                row[idx] = rule.mapping[str(row[idx])]
            columns[idx] = Column(name, CATEGORICAL)
            log.append({"column": name, "rule": "label-map"})
            continue
        if col.kind != NUMERIC:
            raise NonNumericColumn(f"{name!r} is categorical; threshold rules need numbers")
        if isinstance(rule, MedianThreshold):
            med = float(np.median(np.asarray(values, dtype=float)))
            thresholds = (med,)
            log.append({"column": name, "rule": "median-threshold", "median": med})
        else:
            thresholds = rule.thresholds
            log.append({"column": name, "rule": "explicit-thresholds",
                        "thresholds": list(thresholds)})
        labels = _bin_labels(len(thresholds) + 1)
        for row in matrix:
            v = row[idx]
            bin_i = 0
            for t in thresholds:
                if v > t:
                    bin_i += 1
            row[idx] = labels[bin_i]
        columns[idx] = Column(name, CATEGORICAL)
    provenance = dict(data.provenance)
    provenance["transforms"] = log
    return Dataset(tuple(columns), tuple(tuple(r) for r in matrix), provenance)


def fit_parameters(structure: Mapping, data: Dataset, smoothing: float = 0.0,
                   report: dict | None = None) -> Network:
    """Maximum-likelihood CPTs for a fixed structure.

    ``structure``: {"variables": [{"name", "states"?}], "edges": [[a, b], ...]}.
    When states are declared they must equal the column's observed category
    set; undeclared states default to the sorted observed labels. With zero
    smoothing, parent assignments never seen in the data get the uniform
    vector and are flagged in ``report`` (pass a dict to collect it).
    """
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    if len(data) == 0:
        raise EmptyDataset("cannot fit parameters to an empty dataset")
    var_docs = structure["variables"]
    edges = [tuple(e) for e in structure.get("edges", [])]
    variables: list[Variable] = []
    for vd in var_docs:
        name = vd["name"]
        observed = data.categories(name)
        if "states" in vd and vd["states"]:
            declared = [str(s) for s in vd["states"]]
            if sorted(declared) != observed:
                raise StateMismatch(
                    f"{name!r}: declared states {declared} != observed categories {observed}"
                )
            states = tuple(declared)
        else:
            states = tuple(observed)
        variables.append(Variable(name, states))
    by_name = {v.name: v for v in variables}
    in_edges: dict[str, list[str]] = {v.name: [] for v in variables}
    for a, b in edges:
        in_edges[b].append(a)

    col_idx = {v.name: data.column_index(v.name) for v in variables}
    state_idx = {v.name: {s: i for i, s in enumerate(v.states)} for v in variables}
    uniform_rows: list[str] = []
    cpts: dict[str, Cpt] = {}
    for v in variables:
        parents = tuple(in_edges[v.name])
        shape = tuple(by_name[p].cardinality for p in parents) + (v.cardinality,)
        counts = np.zeros(shape)
        for rec in data.records:
            key = tuple(state_idx[p][rec[col_idx[p]]] for p in parents)
            counts[key + (state_idx[v.name][rec[col_idx[v.name]]],)] += 1
        counts += smoothing
        table: dict[tuple[str, ...], tuple[float, ...]] = {}
        parent_states = [by_name[p].states for p in parents]
        for combo in itertools.product(*(range(len(s)) for s in parent_states)):
            key = tuple(parent_states[i][combo[i]] for i in range(len(parents)))
            vec = counts[combo]
            total = vec.sum()
            if total <= 0:
                table[key] = tuple([1.0 / v.cardinality] * v.cardinality)
                uniform_rows.append(f"{v.name}{key}")
            else:
                table[key] = tuple(float(x) for x in vec / total)
        cpts[v.name] = Cpt(v.name, parents, table)
    network = Network(tuple(variables), tuple(edges), cpts)
    if report is not None:
        report["uniform_filled_rows"] = uniform_rows
    return network


def export_csv(data: Dataset, path) -> None:
    """Write the dataset back out: header row, one line per record."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([c.name for c in data.columns])
        for rec in data.records:
            writer.writerow(list(rec))


def dataset_from_rows(columns: Sequence[tuple[str, str]], rows: Sequence[Sequence],
                      source: str = "memory") -> Dataset:
    cols = tuple(Column(n, k) for n, k in columns)
    return Dataset(cols, tuple(tuple(r) for r in rows),
                   {"source": source, "rows_kept": len(rows),
                    "rows_dropped_missing": 0, "cells_filled": 0, "transforms": []})
