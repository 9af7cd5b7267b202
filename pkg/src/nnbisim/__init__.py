"""Exact and approximate bisimulation-based reduction of feedforward networks."""

from .approx import (
    DeltaReport,
    ErrorBound,
    LayerBound,
    RepresentativePolicy,
    check_delta_bisimulation,
    closed_form_bound,
    enumerate_quotients,
    eps_abstraction_contains,
    global_error_bound,
    greedy_delta_partition,
    one_step_error,
    quotient_delta,
    two_eps_consistency,
)
from .bisim import BisimReport, Witness, abstract_valuation, check_bisimulation, quotient
from .errors import ContractError, DocumentError, NNBisimError, PreconditionError, ValidationError
from .generate import generate_planted, random_network
from .io import load_model, load_partition, save_model, save_partition
from .minimize import (
    MinimizeResult,
    RefinementStep,
    RefinementTrace,
    find_inconsistent_pair,
    maximality_check,
    minimize,
    split_act_bias,
    split_pre,
)
from .network import (
    ActivationKind,
    Network,
    Valuation,
    eval_layer,
    eval_network,
    eval_trace,
    forward,
    leaky_relu,
    pre_sum,
)
from .partition import (
    LayerPartition,
    NetPartition,
    concretize,
    identity_partition,
    is_consistent,
    is_eps_consistent,
    is_finer,
)

__version__ = "0.1.0"
