"""Bayesian decision-tree classification by reversible-jump MCMC, with a
sweeping sampling strategy and uncertainty-envelope evaluation."""

__version__ = "0.1.0"

from .balance import BalanceResult, BalanceSpec, analytic_fractions, emulate
from .dataset import (
    ColumnDecl,
    Continuous,
    Dataset,
    FeatureIndex,
    FoldPlan,
    Nominal,
    Schema,
    SchemaError,
    feature_index,
    gen_xor3,
    kfold_split,
    load_csv,
    read_schema,
    save_csv,
    write_schema,
)
from .envelope import (
    EnvelopeReport,
    FoldOutcome,
    VoteMatrix,
    aggregate_report,
    classify_outcome,
    consistency,
    ensemble_votes,
    fold_outcome,
)
from .likelihood import (
    ChipmanPrior,
    PriorConfig,
    fit_log_likelihood,
    leaf_log_term,
    log_likelihood_delta,
    log_marginal_likelihood,
)
from .rjmcmc import (
    ChainConfig,
    ChainDiagnostics,
    Ensemble,
    ProposalConfig,
    accept,
    chipman_split_prior,
    log_catalan,
    propose_birth,
    propose_change_rule,
    propose_change_split,
    propose_death,
    run_chain,
    substream,
    subseed,
)
from .sweeping import (
    Proceed,
    RESAMPLE,
    SweptToDeath,
    draw_rule_gaussian,
    draw_rule_uniform,
    draw_variable_excluding,
    resolve,
    split_probability,
)
from .tree import (
    Category,
    Leaf,
    Split,
    SplitRule,
    Threshold,
    Tree,
    from_record,
    predict_leaf_posterior,
    prunable_count,
    refit_leaves,
    route,
    single_leaf_tree,
    snapshot,
    to_record,
)
