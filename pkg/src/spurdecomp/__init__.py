"""Decomposition of spurious variations in discrete structural causal models."""

__version__ = "0.1.0"

from .decompose import (  # noqa: E402
    DecompositionReport,
    decompose,
    markov_decompose,
    semimarkov_decompose,
    tv_decompose,
)
from .diagram import (  # noqa: E402
    CausalDiagram,
    anchor_set,
    check_aseac,
    check_identifiable,
    confounders_in_topological_order,
    load_diagram,
    project,
    spurious_treks,
    tops_of_spurious_treks,
)
from .engine import (  # noqa: E402
    Expect,
    conditional_prob,
    counterfactual_prob,
    exp_se,
    exp_se_set,
    interventional_prob,
    pa_conditional,
)
from .estimate import (  # noqa: E402
    Dataset,
    bootstrap_ci,
    bootstrap_decomposition,
    estimate_decomposition,
    estimate_pa_anchor,
    estimate_pa_markov,
    fit_cpt,
)
from .scm import SCM, interventional, joint_observational, load_bundled, load_model  # noqa: E402
