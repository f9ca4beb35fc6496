"""feobn: edit a Bayesian network's control CPT until opportunity is fair.

The toolkit represents discrete Bayesian networks, partitions their
variables into justified / sensitive / other roles, builds the linear
constraint system that makes the target independent of the sensitive
variables given the justified ones, solves it exactly when possible (and
as a constrained least-squares fit otherwise), and samples synthetic
records from the corrected network.
"""

from .network import (
    Assignment,
    Cpt,
    FeoScenario,
    Network,
    RoleAssignment,
    Variable,
    assign_roles,
    build_network,
    validate,
)
from .inference import (
    ConditionalTable,
    Factor,
    conditional,
    eliminate,
    feo_deviation,
    feo_table,
    joint_probability,
    marginal,
)
from .learning import (
    Dataset,
    DiscretizationPolicy,
    discretize,
    fit_parameters,
    ingest_csv,
)
from .solver import (
    FeoSystem,
    ParameterIndex,
    Solution,
    add_feasibility_constraints,
    apply_solution,
    build_feo_system,
    enumerate_free_parameters,
    solve,
    solve_closest,
    solve_exact,
)
from .sampler import SampleRequest, sample

__version__ = "0.1.0"

__all__ = [
    "Assignment", "Cpt", "FeoScenario", "Network", "RoleAssignment", "Variable",
    "assign_roles", "build_network", "validate",
    "ConditionalTable", "Factor", "conditional", "eliminate", "feo_deviation",
    "feo_table", "joint_probability", "marginal",
    "Dataset", "DiscretizationPolicy", "discretize", "fit_parameters", "ingest_csv",
    "FeoSystem", "ParameterIndex", "Solution", "add_feasibility_constraints",
    "apply_solution", "build_feo_system", "enumerate_free_parameters",
    "solve", "solve_closest", "solve_exact",
    "SampleRequest", "sample",
]
