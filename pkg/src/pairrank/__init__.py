"""pairrank: latent scores, evaluation, and live surveys for pairwise comparisons."""

from .batch import CoParams, LsrParams, bt_predict, co_fit, lsr_fit, stationary_distribution
from .data import (
    ComparisonRecord,
    DataError,
    Dataset,
    GaussianRating,
    ItemCatalog,
    Outcome,
    OutcomeDistribution,
    ScoreTable,
    split,
)
from .evaluation import (
    EvaluationReport,
    accuracy,
    evaluate,
    grid_search,
    log_loss,
    normalize_scores,
)
from .gp import GpParams, PosteriorTable, ep_fit, gp_predict, tilted_moments
from .io import load_catalog, parse_comparisons, read_score_table, write_comparisons, write_score_table
from .labeling import LabelParams, LabeledItem, export_labels, label_items, thresholds
from .online import (
    EloParams,
    TrueSkillParams,
    draw_margin_from_tie_rate,
    elo_expected,
    elo_predict,
    elo_update,
    rate_elo,
    rate_sequence,
    rate_trueskill,
    ts_predict,
    ts_update,
)
from .simulate import simulate_bt

__version__ = "0.1.0"
