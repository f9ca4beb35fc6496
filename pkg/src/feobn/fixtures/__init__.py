"""Bundled example scenarios.

Hand-authored networks (college, campaign, mini) ship as ready network
documents. The two dataset-backed scenarios (ibm-hr, campus) are learned on
first use from the CSV files under ``data/`` with the schema, structure, and
role documents in this directory; the documents pin every convention so the
learned networks are bit-reproducible:

* ibm-hr - IBM HR attrition records (1470 rows, synthetic, published by
  IBM as open sample data). WorkLifeBalance is binarized at threshold 2
  ({1,2} -> low), RecentPromotion at threshold 0 on YearsSinceLastPromotion
  (low means promoted within the last year). Education (5 levels) and
  JobSatisfaction (4 levels) stay categorical. The reference promotion
  table for this scenario reports education bands [1, 1, 2, 3, 4]: the two
  lowest education labels share band 1 and level 5 is unreported.
* campus - campus recruitment records (215 rows, public). The five percent
  scores and salary are median-binarized; students without a salary enter
  as salary 0 (so they land in the low bin) and the median is taken over
  all 215 rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..learning import DiscretizationPolicy, discretize, fit_parameters, ingest_csv
from ..network import FeoScenario, Network, RoleAssignment, assign_roles, build_network

FIXTURE_NAMES = ("college", "campaign", "mini", "ibm-hr", "campus")

_LEARNED = {
    "ibm-hr": ("ibm_hr", "ibm_hr_attrition.csv"),
    "campus": ("campus", "campus_placement.csv"),
}


def _read(name: str) -> dict | list:
    with resources.files(__package__).joinpath(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def free_entries_from_document(network: Network, roles_doc: dict):
    """Resolve the roles document's free_entries against the network.

    Each entry is {"given": {parent: state, ...}} for a whole row, plus an
    optional "state" to free a single coordinate. Row keys follow the
    control CPT's declared parent order.
    """
    entries = roles_doc.get("free_entries")
    if entries is None:
        return None
    parents = network.parents(roles_doc["control"])
    resolved = []
    for e in entries:
        given = e["given"]
        row = tuple(given[p] for p in parents)
        resolved.append((row, e["state"]) if "state" in e else row)
    return resolved


def fixture_names() -> tuple[str, ...]:
    return FIXTURE_NAMES


@dataclass(frozen=True)
class FixtureBundle:
    name: str
    network: Network
    roles_doc: dict
    constraints: list | None
    description: str

    def scenario(self) -> FeoScenario:
        roles = RoleAssignment.from_document(self.roles_doc)
        free = free_entries_from_document(self.network, self.roles_doc)
        return assign_roles(self.network, roles, free)


_DESCRIPTIONS = {
    "college": "synthetic admissions scenario: talent and class feed testing, "
               "admission, and hiring; the low-class admission rows are editable",
    "campaign": "synthetic election-funding scenario with a three-state outcome; "
                "equal opportunity is unattainable and only a closest fit exists",
    "mini": "four-node teaching scenario with a one-parameter analytic solution",
    "ibm-hr": "promotion equity scenario learned from the IBM HR attrition data",
    "campus": "internship/salary scenario learned from campus recruitment data",
}


@lru_cache(maxsize=None)
def load_fixture(name: str) -> FixtureBundle:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}")
    if name in _LEARNED:
        prefix, csv_name = _LEARNED[name]
        network = learn_fixture_network(name)
        roles_doc = _read(f"{prefix}.roles.json")
        constraints = None
    else:
        prefix = name
        network = build_network(_read(f"{prefix}.network.json"))
        roles_doc = _read(f"{prefix}.roles.json")
        try:
            constraints = _read(f"{prefix}.constraints.json")
        except FileNotFoundError:
            constraints = None
    return FixtureBundle(name, network, roles_doc, constraints, _DESCRIPTIONS[name])


@lru_cache(maxsize=None)
def learn_fixture_network(name: str) -> Network:
    prefix, csv_name = _LEARNED[name]
    schema = _read(f"{prefix}.schema.json")
    structure = _read(f"{prefix}.structure.json")
    csv_path = resources.files(__package__).joinpath("data", csv_name)
    with resources.as_file(csv_path) as p:
        data = ingest_csv(p, schema)
    policy = DiscretizationPolicy.from_document(schema.get("discretize", {}))
    data = discretize(data, policy)
    return fit_parameters(structure, data, smoothing=0.0)
