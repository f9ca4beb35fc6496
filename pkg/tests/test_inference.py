import itertools

import numpy as np
import pytest

from feobn.errors import IncompleteAssignment, ZeroEvidenceProbability
from feobn.fixtures import load_fixture
from feobn.inference import (
    brute_conditional,
    brute_marginal,
    conditional,
    eliminate,
    feo_deviation,
    feo_table,
    joint_probability,
    marginal,
)
from feobn.network import Cpt, assign_roles

from conftest import make_network, binary_root, random_network, random_partial_assignment


class TestJointProbability:
    def test_three_independent_uniform(self, three_uniform):
        assert joint_probability(three_uniform, {"X": "1", "Y": "0", "Z": "1"}) == pytest.approx(0.125)

    def test_chain_product(self, chain_ab):
        assert joint_probability(chain_ab, {"A": "1", "B": "1"}) == pytest.approx(0.27)

    def test_incomplete_assignment(self, chain_ab):
        with pytest.raises(IncompleteAssignment):
            joint_probability(chain_ab, {"A": "1"})

    def test_joint_sums_to_one_on_random_networks(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            net = random_network(rng, max_vars=5)
            total = sum(
                joint_probability(net, dict(zip(net.names, combo)))
                for combo in itertools.product(*(net.variable(n).states for n in net.names))
            )
            assert total == pytest.approx(1.0, abs=1e-9)


class TestMarginalConditional:
    def test_empty_query_is_one(self, chain_ab):
        assert marginal(chain_ab, {}) == pytest.approx(1.0)

    def test_root_marginal(self, chain_ab):
        assert marginal(chain_ab, {"A": "1"}) == pytest.approx(0.3)

    def test_conditional_with_empty_evidence_is_marginal(self, chain_ab):
        assert conditional(chain_ab, {"B": "1"}, {}) == pytest.approx(marginal(chain_ab, {"B": "1"}))

    def test_zero_evidence_raises(self):
        net = make_network(
            {"A": ["0", "1"], "B": ["0", "1"]},
            [("A", "B")],
            {"A": binary_root(0.0),
             "B": {("0",): (0.5, 0.5), ("1",): (0.5, 0.5)}},
        )
        with pytest.raises(ZeroEvidenceProbability):
            conditional(net, {"B": "1"}, {"A": "1"})

    def test_matches_brute_oracle(self, chain_ab):
        for b in "01":
            got = conditional(chain_ab, {"A": "1"}, {"B": b})
            want = brute_conditional(chain_ab, {"A": "1"}, {"B": b})
            assert got == pytest.approx(want, abs=1e-12)


class TestEliminate:
    def test_keep_all_equals_full_joint(self, chain_ab):
        factor = eliminate(chain_ab, ["A", "B"])
        for i, a in enumerate("01"):
            for j, b in enumerate("01"):
                want = joint_probability(chain_ab, {"A": a, "B": b})
                assert factor.values[i, j] == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("polytree", [True, False])
    def test_matches_enumeration_on_random_networks(self, polytree):
        rng = np.random.default_rng(101 if polytree else 202)
        for _ in range(30):
            net = random_network(rng, max_vars=6 if not polytree else 8,
                                 max_states=3, polytree=polytree)
            for _ in range(3):
                query = random_partial_assignment(rng, net, max_vars=2)
                want = brute_marginal(net, query)
                got = marginal(net, query)
                assert got == pytest.approx(want, abs=1e-9)

    def test_normalized_factor_matches_enumeration(self):
        rng = np.random.default_rng(7)
        net = random_network(rng, max_vars=5)
        target = net.names[-1]
        evidence = {net.names[0]: net.variable(net.names[0]).states[0]}
        if target in evidence:
            return
        factor = eliminate(net, [target], evidence).normalized()
        for idx, state in enumerate(net.variable(target).states):
            want = brute_conditional(net, {target: state}, evidence)
            assert factor.values[idx] == pytest.approx(want, abs=1e-9)


class TestFeoTable:
    def test_campaign_layout(self):
        scenario = load_fixture("campaign").scenario()
        table = feo_table(scenario)
        cells = [r for r in table.rows if r.sensitive is not None]
        anchors = [r for r in table.rows if r.sensitive is None]
        # 2 leadership x 2 family x 3 election states, plus 2 x 3 anchor rows
        assert len(cells) == 12
        assert len(anchors) == 6

    def test_row_groups_normalize(self):
        scenario = load_fixture("campaign").scenario()
        table = feo_table(scenario)
        groups = {}
        for row in table.rows:
            groups.setdefault((row.justified, row.sensitive), 0.0)
            groups[(row.justified, row.sensitive)] += row.probability
        for total in groups.values():
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_disconnected_sensitive_gives_equal_cells(self):
        # S has no path to Q, so P(q | j, s) cannot depend on s
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["0", "1"], "Q": ["0", "1"]},
            [("J", "Q"), ("C", "Q"), ("S", "C")],
            {"J": binary_root(0.4), "S": binary_root(0.5),
             "C": {("0",): (0.7, 0.3), ("1",): (0.2, 0.8)},
             "Q": {(j, c): (1 - v, v) for (j, c), v in
                   {("0", "0"): 0.2, ("0", "1"): 0.5, ("1", "0"): 0.4, ("1", "1"): 0.9}.items()}},
        )
        # disconnect S from Q by rewiring C to ignore S
        net = net.with_cpt(Cpt("C", ("S",), {("0",): (0.6, 0.4), ("1",): (0.6, 0.4)}))
        from feobn.network import RoleAssignment
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        scenario = assign_roles(net, roles)
        table = feo_table(scenario)
        assert feo_deviation(scenario, table) == pytest.approx(0.0, abs=1e-12)

    def test_mini_pre_solve_depends_on_s(self):
        scenario = load_fixture("mini").scenario()
        table = feo_table(scenario)
        low = table.lookup({"T": "low"}, {"S": "low"}, "yes")
        high = table.lookup({"T": "low"}, {"S": "high"}, "yes")
        assert abs(low - high) > 0.01

    def test_law_of_total_probability(self):
        scenario = load_fixture("college").scenario()
        net = scenario.network
        table = feo_table(scenario)
        for t in net.variable("Talent").states:
            for q in net.variable("Job").states:
                anchor = table.lookup({"Talent": t}, None, q)
                mix = sum(
                    table.lookup({"Talent": t}, {"SES": s}, q)
                    * conditional(net, {"SES": s}, {"Talent": t})
                    for s in net.variable("SES").states
                )
                assert anchor == pytest.approx(mix, abs=1e-9)

    def test_zero_cell_raises_with_name(self):
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["0", "1"], "Q": ["0", "1"]},
            [("J", "Q"), ("S", "Q"), ("C", "Q")],
            {"J": binary_root(0.5), "S": binary_root(0.0), "C": binary_root(0.5),
             "Q": {key: (0.5, 0.5) for key in itertools.product("01", repeat=3)}},
        )
        from feobn.network import RoleAssignment
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        scenario = assign_roles(net, roles)
        with pytest.raises(ZeroEvidenceProbability, match="S"):
            feo_table(scenario)


class TestFeoDeviation:
    def test_zero_iff_fair(self):
        scenario = load_fixture("mini").scenario()
        assert feo_deviation(scenario) > 0.1

    def test_campaign_positive(self):
        scenario = load_fixture("campaign").scenario()
        assert feo_deviation(scenario) > 0.2


def test_control_cpt_edits_leave_role_marginals_alone():
    # this theta-invariance is what keeps the constraint system linear
    rng = np.random.default_rng(5)
    scenario = load_fixture("college").scenario()
    net = scenario.network
    j0 = marginal(net, {"Talent": "gifted"})
    js0 = marginal(net, {"Talent": "gifted", "SES": "low"})
    for _ in range(5):
        table = {}
        for row in net.cpts["College"].table:
            p = float(rng.random())
            table[row] = (1 - p, p)
        modified = net.with_cpt(Cpt("College", net.parents("College"), table))
        assert marginal(modified, {"Talent": "gifted"}) == pytest.approx(j0, abs=1e-12)
        assert marginal(modified, {"Talent": "gifted", "SES": "low"}) == pytest.approx(js0, abs=1e-12)


def test_table_csv_layout():
    scenario = load_fixture("mini").scenario()
    csv_text = feo_table(scenario).to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0] == "T,S,Q,probability"
    anchor_lines = [l for l in lines[1:] if ",*," in l]
    assert anchor_lines, "anchor rows are marked with *"


def test_marginal_matches_million_sample_frequency():
    # independent route: the sampler never consults marginal()
    from feobn.sampler import SampleRequest, sample

    net = load_fixture("college").network
    p = marginal(net, {"Job": "good"})
    n = 1_000_000
    data = sample(net, SampleRequest(count=n, seed=8, columns=("Job",)))
    freq = sum(1 for r in data.records if r[0] == "good") / n
    assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n)
