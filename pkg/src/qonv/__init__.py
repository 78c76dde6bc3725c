"""qonv: a desk-scale laboratory for high-frequency signal regression.

The package trains three families of coordinate networks on the same signal:
plain MLPs over encoded queries, CNNs over a low-frequency version of the
target, and queried-convolution networks (QNNs) that convolve the channel
concatenation of encoded queries with the low-frequency signal. It also ships
an exact oracle for the optimal-risk chain that motivates the QNN input
(approximation -> neighborhood -> neighborhood plus coordinates) and the
Lambert-W lower bound on Gaussian counts.
"""

from .autodiff import Parameter, Tape, Tensor
from .estimator import NeuralFieldRegressor
from .lambertw import gaussian_count_bound, lambert_w0
from .metrics import MetricsReport, psnr, ssim
from .nets import Encoding, Model, ModelSpec, build_model, forward, matched_width
from .risk import LatticeProblem, optimal_risk, verify_monotone_chain
from .signals import (ImagePair, SignalPair, blur_image, gen_one_over_f,
                      lowpass_split, make_image_pair, make_signal_pair,
                      sample_coords)
from .training import Optimizer, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Encoding", "ImagePair", "LatticeProblem", "MetricsReport", "Model",
    "ModelSpec", "NeuralFieldRegressor", "Optimizer", "Parameter",
    "SignalPair", "Tape", "Tensor", "TrainConfig", "blur_image",
    "build_model", "forward", "gaussian_count_bound", "gen_one_over_f",
    "lambert_w0", "lowpass_split", "make_image_pair", "make_signal_pair",
    "matched_width", "optimal_risk", "psnr", "sample_coords", "ssim",
    "train", "verify_monotone_chain",
]
