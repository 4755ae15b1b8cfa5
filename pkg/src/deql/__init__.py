"""Closed-form linear-autoencoder recommenders under emphasized dropout."""

from .coefficients import EmphasisCoefficients, Hyperparameters, build_H_v, coefficients
from .data import (GramBundle, InteractionMatrix, SplitSpec, check_no_zero_columns, gram,
                   load_interactions, split)
from .errors import (DEQLError, NotPositiveDefiniteError, PreconditionError,
                     SingularUpdateError)
from .metrics import diag_histogram, evaluate, mse, ndcg_at_k, recall_at_k, score_user
from .miller import miller_update
from .oracle import expected_loss, minimality_probe, pd_certificate, sample_loss
from .solvers import (solve, solve_b_zero, solve_direct, solve_ease, solve_fast,
                      solve_low_rank, solve_steck)
from .weights import WeightMatrix, load_weights, save_weights

__version__ = "0.1.0"
