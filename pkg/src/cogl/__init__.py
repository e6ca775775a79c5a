"""Co-alignment graph convolutional learning.

A learned, row-stochastic content network is built from node features and
co-trained with the given topology network through shared convolution
weights, a reconstruction loss, a semi-supervised classification loss and an
adversarial alignment term.
"""

from .adversarial import DiscriminatorParams, discriminate, gan_losses
from .content_net import (ContentNetwork, ContentParams, build_content_network,
                          content_forward, reconstruction_loss)
from .errors import (CoglError, ConfigError, ContractError, DimensionError,
                     GraphLoadError, NumericalError)
from .graph_io import (Graph, NormalizedAdjacency, load_graph, load_graph_dir,
                       normalize_adjacency, save_graph, subsample_nodes)
from .numerics import Matrix, Tape, backward, constant, parameter
from .topo_gcn import (SharedConvParams, accuracy, classification_loss, predict,
                       topology_forward)
from .trainer import (Adam, AdamState, ModelParams, TrainConfig, TrainReport,
                      adam_step, evaluate, init_params, load_checkpoint,
                      save_checkpoint, train)

__version__ = "0.1.0"

__all__ = [
    "Adam", "AdamState", "CoglError", "ConfigError", "ContentNetwork",
    "ContentParams", "ContractError", "DimensionError", "DiscriminatorParams",
    "Graph", "GraphLoadError", "Matrix", "ModelParams", "NormalizedAdjacency",
    "NumericalError", "SharedConvParams", "Tape", "TrainConfig", "TrainReport",
    "accuracy", "adam_step", "backward", "build_content_network",
    "classification_loss", "constant", "content_forward", "discriminate",
    "evaluate", "gan_losses", "init_params", "load_checkpoint", "load_graph",
    "load_graph_dir", "normalize_adjacency", "parameter", "predict",
    "reconstruction_loss", "save_checkpoint", "save_graph", "subsample_nodes",
    "topology_forward", "train",
]
