"""Sparse hinge-and-min networks for regression and NARX identification."""

__version__ = "0.1.0"

from .anova import AnovaEntry, AnovaReport, anova_decompose, anova_importance
from .errors import EhhError
from .gcv import gcv, gcv_score
from .graph import (adjacency_matrix, full_connection_network, interaction_matrix, prune,
                    validate)
from .lasso import AdmmSettings, LassoSolution, lasso_admm
from .network import (EhhNetwork, NormalizationParams, SourceNode, data_matrix,
                      fit_normalizer, forward, linear_network, min_form, variable_set)
from .serialize import load_model, save_model
from .sysid import (BOUC_WEN_SPEC, NARENDRA_LI_SPEC, IoData, NarxSpec, build_regressors,
                    narendra_li_generate, predict_one_step, rmse, simulate_free_run, vaf)
from .trainer import TrainConfig, train
