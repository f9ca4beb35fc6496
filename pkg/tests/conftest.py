import itertools

import numpy as np
import pytest

from feobn.network import Cpt, Network, Variable


def make_network(var_states, edges, tables):
    """Build a Network from {name: [states]}, [(a,b)], {name: {row: vector}}."""
    variables = tuple(Variable(n, tuple(s)) for n, s in var_states.items())
    in_edges = {n: [] for n in var_states}
    for a, b in edges:
        in_edges[b].append(a)
    cpts = {}
    for v in variables:
        parents = tuple(in_edges[v.name])
        table = {tuple(k) if isinstance(k, tuple) else k: tuple(vec)
                 for k, vec in tables[v.name].items()}
        cpts[v.name] = Cpt(v.name, parents, table)
    return Network(variables, tuple(edges), cpts)


def binary_root(p_one):
    return {(): (1.0 - p_one, p_one)}


def random_network(rng, max_vars=6, max_states=3, polytree=False):
    """Random valid network: random DAG shape, Dirichlet CPT rows."""
    n = rng.integers(2, max_vars + 1)
    names = [f"V{i}" for i in range(n)]
    cards = rng.integers(2, max_states + 1, size=n)
    var_states = {names[i]: [f"s{k}" for k in range(cards[i])] for i in range(n)}
    edges = []
    if polytree:
        # random tree skeleton, edges oriented along the variable order
        for i in range(1, n):
            j = int(rng.integers(0, i))
            edges.append((names[j], names[i]))
    else:
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.4:
                    edges.append((names[i], names[j]))
    in_edges = {m: [] for m in names}
    for a, b in edges:
        in_edges[b].append(a)
    tables = {}
    for i, name in enumerate(names):
        parents = in_edges[name]
        rows = {}
        parent_states = [var_states[p] for p in parents]
        for combo in itertools.product(*parent_states):
            vec = rng.dirichlet(np.ones(cards[i]))
            rows[tuple(combo)] = tuple(float(x) for x in vec / vec.sum())
        tables[name] = rows
    return make_network(var_states, edges, tables)


def random_partial_assignment(rng, network, max_vars=None):
    names = list(network.names)
    k = int(rng.integers(0, (max_vars or len(names)) + 1))
    chosen = list(rng.choice(names, size=min(k, len(names)), replace=False))
    return {n: str(rng.choice(network.variable(n).states)) for n in chosen}


@pytest.fixture
def chain_ab():
    """A -> B with P(A=1)=0.3, P(B=1|A=1)=0.9, P(B=1|A=0)=0.5."""
    return make_network(
        {"A": ["0", "1"], "B": ["0", "1"]},
        [("A", "B")],
        {"A": {(): (0.7, 0.3)},
         "B": {("0",): (0.5, 0.5), ("1",): (0.1, 0.9)}},
    )


@pytest.fixture
def three_uniform():
    return make_network(
        {"X": ["0", "1"], "Y": ["0", "1"], "Z": ["0", "1"]},
        [],
        {"X": binary_root(0.5), "Y": binary_root(0.5), "Z": binary_root(0.5)},
    )
