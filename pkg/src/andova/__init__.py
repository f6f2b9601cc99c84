"""Multi-scale Beta-Binomial comparison of replicated distributions across groups."""

__version__ = "0.1.0"

from .decision import DecisionReport, bayesian_fdr, decide, threshold_for_fdr
from .evidence import (
    JEFFREYS,
    BetaPrior,
    EvidenceError,
    NuGrid,
    TreeEvidence,
    WindowEvidence,
    compute_evidence,
    effect_size,
    laplace_inner,
    log_D,
    window_evidence,
)
from .markov_tree import (
    ElicitationError,
    MessageSet,
    PosteriorTransitions,
    TransitionSpec,
    downward_marginals,
    elicit_beta,
    elicit_delta,
    expected_signals,
    level_transitions,
    posterior_transitions,
    prior_marginals,
    prjap_closed_form,
    upward_messages,
)
from .model import FitConfig, FitResult, fit, fit_counts
from .msbb import fit_independent, pmap_independent
from .partition import (
    CountTree,
    Dataset,
    PartitionError,
    WindowTree,
    bin_counts,
    build_ndp,
    load_dataset,
)
from .report import PosteriorReport, build_report
from .sampler import PosteriorDraw, sample_params, sample_states
from .simulation import ScenarioSpec, generate, run_roc
