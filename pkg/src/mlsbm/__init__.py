"""Community detection in multi-layer networks with the multi-layer and
restricted multi-layer stochastic blockmodels."""
from .baselines import aggregate_mean, aggregate_sparse, align_labels, fit_single_layer_sbm, majority_vote
from .blockmodel import MLSBMParams, RMLSBMParams
from .graph import GroundTruth, MultiLayerGraph, generate_mlsbm, generate_planted, load_multilayer
from .metrics import ccr, misclustered_count, misclustering_rate, nmi
from .spectral import spectral_init
from .vem_mlsbm import FitResult, VEMOptions, fit_mlsbm
from .vem_rmlsbm import RmlsbmFitResult, fit_rmlsbm

__version__ = "0.1.0"
