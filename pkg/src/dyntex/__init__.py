"""Dynamic texture modelling with sparse-code linear dynamical systems."""

from .avdl import AvdlModel, AvdlParams, objective, train
from .dynamics import MetricsReport, SynthesisSpec, evaluate, reconstruct, synthesize
from .elastic_net import ElasticNetParams, SparseCode, batch_solve, solve
from .lds import LdsModel, fit_lds, martin_distance
from .video_io import FrameSequence, GaussianNoise, Occlusion, corrupt, load_sequence, save_sequence

__version__ = "0.1.0"

__all__ = [
    "AvdlModel",
    "AvdlParams",
    "ElasticNetParams",
    "FrameSequence",
    "GaussianNoise",
    "LdsModel",
    "MetricsReport",
    "Occlusion",
    "SparseCode",
    "SynthesisSpec",
    "batch_solve",
    "corrupt",
    "evaluate",
    "fit_lds",
    "load_sequence",
    "martin_distance",
    "objective",
    "reconstruct",
    "save_sequence",
    "solve",
    "synthesize",
    "train",
]
