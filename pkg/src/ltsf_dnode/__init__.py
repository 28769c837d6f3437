"""Long-term forecasting with data-driven decomposition, instance
normalization and linear neural ODEs."""

from .data import Panel, SplitSpec, WindowPair, load_csv, split, windows, zscore_fit_transform
from .decomposition import DecompConfig, DecomposedWindow, decompose
from .eda import CandidateGrid, EdaReport, select_parameters
from .harness import ExperimentConfig, RunReport, build_pipeline, grid_search, run_experiment
from .instnorm import NormState, denormalize, normalize
from .metrics import EvalResult, evaluate, mae, mse
from .node import ComponentParams, ModelParams, SolverConfig, TrajectoryStats
from .synth import SynthSpec, synth_generate
from .training import TrainConfig, TrainReport, train

__version__ = "0.1.0"
