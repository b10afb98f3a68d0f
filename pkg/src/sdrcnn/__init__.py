"""Pansharpening toolkit: a small dense-residual CNN plus classical baselines.

Everything runs on float64 numpy arrays.  Rasters are (bands, h, w) cubes;
the network consumes a single-band PAN image and a factor-4 downsampled MS
cube and predicts the missing high-resolution spectral detail.
"""
from .classical import gram_schmidt, sfim
from .errors import (
    ConfigError,
    DegenerateInputError,
    NonFiniteValueError,
    RasterFormatError,
    SdrcnnError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .metrics import MetricReport, aem, aggregate, d_lambda, d_s, ergas, q2n, qnr, sam, scc
from .model import (
    SdrcnnConfig,
    SdrcnnParams,
    budget_width,
    build_input,
    dense_forward,
    init_params,
    param_count,
    sharpen,
)
from .raster import load_checkpoint, read_raster, save_checkpoint, write_raster
from .tensor import Tensor4, grad_check, kernel_backend
from .train import TrainConfig, TrainResult, evaluate, run_ablation, smooth_loss, train
from .wald import SamplePair, SensorModel, make_samples, mtf_blur, split, synth_scene

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateInputError", "MetricReport", "NonFiniteValueError",
    "RasterFormatError", "SamplePair", "SdrcnnConfig", "SdrcnnError", "SdrcnnParams",
    "SensorModel", "ShapeMismatchError", "Tensor4", "TrainConfig", "TrainResult",
    "TrainingDivergedError", "aem", "aggregate", "budget_width", "build_input",
    "d_lambda", "d_s", "dense_forward", "ergas", "evaluate", "grad_check",
    "gram_schmidt", "init_params", "kernel_backend", "load_checkpoint",
    "make_samples", "mtf_blur", "param_count", "q2n", "qnr", "read_raster",
    "run_ablation", "sam", "save_checkpoint", "scc", "sfim", "sharpen",
    "smooth_loss", "split", "synth_scene", "train", "write_raster",
]
