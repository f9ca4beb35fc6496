import numpy as np
import pytest

from feobn.errors import InfeasibleConstraints, ZeroEvidenceProbability
from feobn.fixtures import load_fixture
from feobn.inference import feo_deviation, marginal
from feobn.network import RoleAssignment, assign_roles
from feobn.solver import (
    add_feasibility_constraints,
    apply_solution,
    build_feo_system,
    enumerate_free_parameters,
    linearize_event,
    solve,
    solve_closest,
    solve_exact,
)

from conftest import make_network, binary_root


def scenario_of(name):
    return load_fixture(name).scenario()


def _probe_solution(theta):
    from feobn.solver import Solution
    return Solution(theta=tuple(float(x) for x in theta), status="probe",
                    residuals=(), objective=0.0)


def resolve(scenario, mode="auto", constraints=None):
    index = enumerate_free_parameters(scenario)
    system = build_feo_system(scenario, index)
    if constraints:
        system = add_feasibility_constraints(system, constraints)
    solution = solve(system, mode)
    return index, system, solution


class TestParameterEnumeration:
    def test_college_all_rows_free_gives_four_parameters(self):
        bundle = load_fixture("college")
        roles = RoleAssignment.from_document(bundle.roles_doc)
        scenario = assign_roles(bundle.network, roles, None)
        index = enumerate_free_parameters(scenario)
        assert len(index) == 4  # binary control: one free probability per row

    def test_college_fixed_high_rows_gives_two(self):
        index = enumerate_free_parameters(scenario_of("college"))
        assert len(index) == 2
        assert all(row[0] == "low" for row, _ in index.coords)

    def test_deterministic_ordering(self):
        index = enumerate_free_parameters(scenario_of("college"))
        assert index.coords == ((("low", "fail"), "admitted"), (("low", "pass"), "admitted"))

    def test_saturated_row_forces_theta_to_zero(self):
        # fixed entries already lay claim to the full row, so the free
        # coordinate's cap is zero
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["a", "b", "c"], "Q": ["0", "1"]},
            [("S", "C"), ("C", "Q"), ("J", "Q")],
            {"J": binary_root(0.5), "S": binary_root(0.5),
             "C": {("0",): (0.0, 1.0, 0.0), ("1",): (0.2, 0.5, 0.3)},
             "Q": {(c, j): (0.5, 0.5) for c in "abc" for j in "01"}},
        )
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        # free only state c of row (0,): state b stays fixed at 1.0
        scenario = assign_roles(net, roles, [(("0",), "c")])
        index = enumerate_free_parameters(scenario)
        assert index.fixed_mass[("0",)] == pytest.approx(1.0)
        system = build_feo_system(scenario, index)
        solution = solve_closest(system)
        theta = dict(zip(index.coords, solution.theta))
        assert theta[(("0",), "c")] == pytest.approx(0.0, abs=1e-9)

    def test_partial_row_freedom_keeps_other_entries_fixed(self):
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["a", "b", "c"], "Q": ["0", "1"]},
            [("S", "C"), ("C", "Q"), ("J", "Q")],
            {"J": binary_root(0.5), "S": binary_root(0.5),
             "C": {("0",): (0.1, 0.6, 0.3), ("1",): (0.2, 0.5, 0.3)},
             "Q": {(c, j): (0.5, 0.5) for c in "abc" for j in "01"}},
        )
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        scenario = assign_roles(net, roles, [(("1",), "b")])
        index = enumerate_free_parameters(scenario)
        assert index.coords == ((("1",), "b"),)
        # state c of that row stays pinned at 0.3
        assert index.fixed_mass[("1",)] == pytest.approx(0.3)
        assert index.fixed_mass[("0",)] == pytest.approx(0.9)  # nothing free there


class TestMiniFixture:
    """Analytic oracle: with S->C, T->Q, C->Q and P(C=yes|S=high)=0.8 fixed,
    P(Q=yes | t, s) = (1 - x_s) P(Q=yes|t,no) + x_s P(Q=yes|t,yes), so the
    cells agree across s iff x_low = x_high = 0.8."""

    def test_exact_solution_is_point_eight(self):
        index, system, solution = resolve(scenario_of("mini"))
        assert solution.status == "exact"
        assert solution.theta[0] == pytest.approx(0.8, abs=1e-8)
        assert max(map(abs, solution.residuals)) <= 1e-10

    def test_post_solve_deviation_vanishes(self):
        scenario = scenario_of("mini")
        index, system, solution = resolve(scenario)
        corrected = apply_solution(scenario, solution, index)
        post = assign_roles(corrected, scenario.roles)
        assert feo_deviation(post) <= 1e-8

    def test_apply_solution_writes_row(self):
        scenario = scenario_of("mini")
        index, system, solution = resolve(scenario)
        corrected = apply_solution(scenario, solution, index)
        assert corrected.cpts["C"].row(("low",))[1] == pytest.approx(0.8, abs=1e-8)
        assert corrected.cpts["C"].row(("high",)) == (0.2, 0.8)


class TestSystemShape:
    def test_binary_counting(self):
        # binary Q, J, S: one equality per (j, s) after reference-state reduction
        system = build_feo_system(scenario_of("mini"))
        assert len(system.equalities) == 4

    def test_three_state_target_counting(self):
        system = build_feo_system(scenario_of("campaign"))
        assert len(system.equalities) == 2 * 2 * 2  # (l, f) pairs x 2 non-reference states

    def test_labels_name_the_cells(self):
        system = build_feo_system(scenario_of("mini"))
        assert any("T=low" in e.label and "S=high" in e.label for e in system.equalities)

    def test_disconnected_sensitive_vacuous_system(self):
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["0", "1"], "Q": ["0", "1"]},
            [("S", "C"), ("J", "Q"), ("C", "Q")],
            {"J": binary_root(0.4), "S": binary_root(0.5),
             "C": {("0",): (0.6, 0.4), ("1",): (0.6, 0.4)},
             "Q": {(j, c): (1 - v, v) for (j, c), v in
                   {("0", "0"): 0.2, ("0", "1"): 0.5, ("1", "0"): 0.4, ("1", "1"): 0.9}.items()}},
        )
        # C ignores S and Q ignores C's upstream S entirely? No: C feeds Q, so
        # S reaches Q through C unless C's rows match. With equal rows the
        # pre-solve distribution is already fair; constraints hold at theta0.
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        scenario = assign_roles(net, roles)
        system = build_feo_system(scenario)
        solution = solve_exact(system)
        assert solution.status == "exact"
        assert solution.theta == pytest.approx(system.index.theta0)

    def test_truly_disconnected_sensitive_zero_coefficients(self):
        # S has no directed path anywhere near Q: every equality degenerates
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["0", "1"], "Q": ["0", "1"]},
            [("J", "Q"), ("C", "Q")],
            {"J": binary_root(0.4), "S": binary_root(0.5),
             "C": binary_root(0.3),
             "Q": {(j, c): (1 - v, v) for (j, c), v in
                   {("0", "0"): 0.2, ("0", "1"): 0.5, ("1", "0"): 0.4, ("1", "1"): 0.9}.items()}},
        )
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        scenario = assign_roles(net, roles)
        system = build_feo_system(scenario)
        for eq in system.equalities:
            assert np.max(np.abs(eq.coeffs)) < 1e-12
            assert abs(eq.rhs) < 1e-12
        solution = solve_exact(system)
        assert solution.status == "exact"
        assert solution.theta == pytest.approx(system.index.theta0)

    def test_zero_probability_cell_aborts(self):
        net = make_network(
            {"J": ["0", "1"], "S": ["0", "1"], "C": ["0", "1"], "Q": ["0", "1"]},
            [("S", "C"), ("J", "Q"), ("C", "Q")],
            {"J": binary_root(0.4), "S": binary_root(0.0),
             "C": {("0",): (0.6, 0.4), ("1",): (0.5, 0.5)},
             "Q": {(j, c): (0.5, 0.5) for j in "01" for c in "01"}},
        )
        roles = RoleAssignment(
            justified=frozenset({"J"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        with pytest.raises(ZeroEvidenceProbability):
            build_feo_system(assign_roles(net, roles))


class TestLinearization:
    """The affine forms must agree with direct inference at arbitrary theta."""

    @pytest.mark.parametrize("name", ["mini", "college", "campaign"])
    def test_linearized_joints_match_inference(self, name):
        rng = np.random.default_rng(17)
        scenario = scenario_of(name)
        index = enumerate_free_parameters(scenario)
        system = build_feo_system(scenario, index)
        caps = {row: 1.0 - index.fixed_mass[row] for row in index.rows()}
        tgt = scenario.target
        for _ in range(20):
            theta = []
            budget = dict(caps)
            for row, _state in index.coords:
                x = rng.uniform(0, budget[row])
                budget[row] -= x
                theta.append(x)
            theta = np.array(theta)
            applied = apply_solution(scenario, _probe_solution(theta), index)
            for eq in system.equalities:
                want_j = marginal(applied, {**dict(eq.justified), tgt: eq.target_state})
                want_js = marginal(applied, {**dict(eq.justified), **dict(eq.sensitive),
                                             tgt: eq.target_state})
                assert eq.pq_j.at(theta) == pytest.approx(want_j, abs=1e-9), eq.label
                assert eq.pq_js.at(theta) == pytest.approx(want_js, abs=1e-9), eq.label

    def test_role_marginals_are_theta_invariant(self):
        rng = np.random.default_rng(23)
        scenario = scenario_of("college")
        index = enumerate_free_parameters(scenario)
        jvar, svar = "Talent", "SES"
        seen = []
        for _ in range(5):
            theta = rng.uniform(0, 1, size=len(index))
            applied = apply_solution(scenario, _probe_solution(theta), index)
            seen.append((
                marginal(applied, {jvar: "gifted"}),
                marginal(applied, {jvar: "gifted", svar: "low"}),
            ))
        for a, b in seen[1:]:
            assert a == pytest.approx(seen[0][0], abs=1e-12)
            assert b == pytest.approx(seen[0][1], abs=1e-12)


class TestFeasibilityConstraints:
    def test_cap_adds_inequality(self):
        scenario = scenario_of("college")
        system = build_feo_system(scenario)
        capped = add_feasibility_constraints(
            system, [{"event": {"College": "admitted"}, "op": "le", "value": 0.5}])
        assert len(capped.inequalities) == 1
        assert capped.inequalities[0].upper == 0.5

    def test_theta_invariant_event_gives_zero_coefficients(self):
        scenario = scenario_of("college")
        system = build_feo_system(scenario)
        current = marginal(scenario.network, {"Talent": "gifted"})
        constrained = add_feasibility_constraints(
            system, [{"event": {"Talent": "gifted"}, "op": "eq", "value": current}])
        iq = constrained.inequalities[0]
        assert np.max(np.abs(iq.coeffs)) < 1e-12
        assert not constrained.warnings
        solution = solve(constrained, "auto")  # still solvable
        assert solution.status == "exact"

    def test_unattainable_bound_detected_early(self):
        # high-class admission rows are fixed below one, so a total admission
        # rate of 1.0 is out of reach no matter what the free rows do
        scenario = scenario_of("college")
        system = build_feo_system(scenario)
        constrained = add_feasibility_constraints(
            system, [{"event": {"College": "admitted"}, "op": "eq", "value": 1.0}])
        with pytest.raises(InfeasibleConstraints):
            solve_closest(constrained)

    def test_zero_coefficient_violation_warns_and_raises(self):
        scenario = scenario_of("college")
        system = build_feo_system(scenario)
        constrained = add_feasibility_constraints(
            system, [{"event": {"Talent": "gifted"}, "op": "eq", "value": 0.9}])
        assert constrained.warnings
        with pytest.raises(InfeasibleConstraints):
            solve_closest(constrained)

    def test_empty_interval_rejected(self):
        scenario = scenario_of("college")
        system = build_feo_system(scenario)
        with pytest.raises(InfeasibleConstraints):
            add_feasibility_constraints(
                system, [{"event": {"College": "admitted"}, "op": "interval",
                          "low": 0.2, "high": 0.1}])

    def test_unknown_event_variable_rejected(self):
        scenario = scenario_of("college")
        system = build_feo_system(scenario)
        with pytest.raises(ValueError, match="malformed"):
            add_feasibility_constraints(
                system, [{"event": {"Nope": "x"}, "op": "le", "value": 0.5}])
        with pytest.raises(ValueError, match="malformed"):
            add_feasibility_constraints(
                system, [{"event": {"College": "nosuchstate"}, "op": "le", "value": 0.5}])


class TestCollege:
    def test_unconstrained_exact(self):
        scenario = scenario_of("college")
        index, system, solution = resolve(scenario)
        assert solution.status == "exact"
        corrected = apply_solution(scenario, solution, index)
        assert feo_deviation(assign_roles(corrected, scenario.roles)) <= 1e-8
        # admissions for the editable rows go up: that is the whole point
        theta = dict(zip(index.coords, solution.theta))
        assert theta[(("low", "fail"), "admitted")] > 0.05
        assert theta[(("low", "pass"), "admitted")] > 0.40

    def test_capped_solve_is_closest_with_cap_met(self):
        bundle = load_fixture("college")
        scenario = bundle.scenario()
        pre = feo_deviation(scenario)
        index, system, solution = resolve(scenario, constraints=bundle.constraints)
        assert solution.status == "closest"
        corrected = apply_solution(scenario, solution, index)
        assert marginal(corrected, {"College": "admitted"}) <= 0.5 + 1e-8
        post = feo_deviation(assign_roles(corrected, scenario.roles))
        assert 1e-8 < post < pre
        assert any("College=admitted" in c for c in solution.active_constraints)


class TestCampaign:
    def test_exact_unattainable(self):
        system = build_feo_system(scenario_of("campaign"))
        assert solve_exact(system) is None

    def test_closest_reduces_deviation_strictly(self):
        scenario = scenario_of("campaign")
        pre = feo_deviation(scenario)
        index, system, solution = resolve(scenario, mode="closest")
        assert solution.status == "closest"
        corrected = apply_solution(scenario, solution, index)
        post_scenario = assign_roles(corrected, scenario.roles)
        post = feo_deviation(post_scenario)
        assert post < pre - 1e-6
        # deviation covers every target state, including the reference one
        assert post == feo_deviation(post_scenario)

    def test_solution_is_first_order_optimal(self):
        scenario = scenario_of("campaign")
        index, system, solution = resolve(scenario, mode="closest")
        A = system.coefficient_matrix
        b = system.rhs_vector
        theta = np.array(solution.theta)
        obj0 = float(np.sum((A @ theta - b) ** 2))
        caps = {row: 1.0 - index.fixed_mass[row] for row in index.rows()}
        for k, (row, _state) in enumerate(index.coords):
            for step in (1e-4, -1e-4):
                probe = theta.copy()
                probe[k] += step
                if probe[k] < 0 or probe[k] > caps[row]:
                    continue
                obj = float(np.sum((A @ probe - b) ** 2))
                assert obj >= obj0 - 1e-10


class TestClosestOracle:
    """One-dimensional variant checked against a brute-force grid scan."""

    def _scenario(self):
        # mini with a direct S->Q edge: a +0.3 boost for S=high makes exact
        # fairness unattainable inside the box
        q = {}
        base = {("low", "no"): 0.2, ("low", "yes"): 0.6,
                ("high", "no"): 0.4, ("high", "yes"): 0.9}
        for (t, c), v in base.items():
            q[(t, c, "low")] = (1 - v, v)
            boosted = min(v + 0.3, 1.0)
            q[(t, c, "high")] = (1 - boosted, boosted)
        net = make_network(
            {"T": ["low", "high"], "S": ["low", "high"],
             "C": ["no", "yes"], "Q": ["no", "yes"]},
            [("S", "C"), ("T", "Q"), ("C", "Q"), ("S", "Q")],
            {"T": binary_root(0.5), "S": binary_root(0.5),
             "C": {("low",): (0.7, 0.3), ("high",): (0.2, 0.8)},
             "Q": q},
        )
        roles = RoleAssignment(
            justified=frozenset({"T"}), sensitive=frozenset({"S"}),
            other=frozenset({"C", "Q"}), control="C", target="Q",
        )
        return assign_roles(net, roles, [("low",)])

    def test_grid_scan_agrees(self):
        scenario = self._scenario()
        index = enumerate_free_parameters(scenario)
        assert len(index) == 1
        system = build_feo_system(scenario, index)
        A = system.coefficient_matrix
        b = system.rhs_vector
        grid = np.arange(0.0, 1.0 + 1e-9, 1e-6)
        objs = np.sum((A[:, 0][None, :] * grid[:, None] - b[None, :]) ** 2, axis=1)
        best = grid[int(np.argmin(objs))]
        solution = solve_closest(system)
        assert solution.status == "closest"
        assert solution.theta[0] == pytest.approx(best, abs=1e-5)
        assert solution.theta[0] == pytest.approx(1.0, abs=1e-6)  # clamps at the box
        assert solution.objective > 1e-6


class TestMonotoneImprovement:
    @pytest.mark.parametrize("name", ["mini", "college", "campaign", "ibm-hr", "campus"])
    def test_post_solve_never_worse(self, name):
        scenario = scenario_of(name)
        pre = feo_deviation(scenario)
        index, system, solution = resolve(scenario)
        corrected = apply_solution(scenario, solution, index)
        post = feo_deviation(assign_roles(corrected, scenario.roles))
        assert post <= pre + 1e-12
        some_signal = any(np.max(np.abs(e.coeffs)) > 1e-12 for e in system.equalities)
        if pre > 1e-8 and some_signal:
            assert post < pre


def test_identity_solution_roundtrip():
    scenario = scenario_of("college")
    index = enumerate_free_parameters(scenario)
    applied = apply_solution(scenario, _probe_solution(index.theta0), index)
    for name in scenario.network.names:
        for row, vec in scenario.network.cpts[name].table.items():
            got = applied.cpts[name].row(row)
            assert got == pytest.approx(vec, abs=1e-12)


def test_linearize_event_matches_marginal():
    scenario = scenario_of("college")
    index = enumerate_free_parameters(scenario)
    system = build_feo_system(scenario, index)
    form = linearize_event(system, {"College": "admitted"})
    theta0 = np.array(index.theta0)
    assert form.at(theta0) == pytest.approx(
        marginal(scenario.network, {"College": "admitted"}), abs=1e-12)
