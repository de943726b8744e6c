from .cnn import CNN_LAYERS, CnnModel, conv_output_length, flattened_size, train_cnn
from .forest import ForestModel, max_split_features, train_rfc
from .grid import (FoldSearchResult, GRID_PRESETS, HyperGrid, grid_search,
                   search_fold)
from .mlp import HIDDEN_UNITS, MlpModel, train_mlp
from .svm import SvmModel, train_svm

__all__ = [
    "CNN_LAYERS",
    "CnnModel",
    "FoldSearchResult",
    "ForestModel",
    "GRID_PRESETS",
    "HIDDEN_UNITS",
    "HyperGrid",
    "MlpModel",
    "SvmModel",
    "conv_output_length",
    "flattened_size",
    "grid_search",
    "max_split_features",
    "search_fold",
    "train_cnn",
    "train_mlp",
    "train_rfc",
    "train_svm",
]
