"""Two-stage guided deformable registration of 3D volumes.

The public API is re-exported here; see the submodules for details.
"""
__version__ = "0.1.0"

from .edt import signed_edt, warp_mask_edt, warp_mask_plain
from .errors import (
    DegenerateMaskError,
    DivergenceError,
    EmptyResponseError,
    GuidedRegError,
    InvalidArgumentError,
)
from .frangi import FrangiParams, extract_dense_mask, frangi_vesselness
from .io import read_volume, verify_manifest, write_volume
from .losses import LossBreakdown, LossConfig, composite_loss, local_cc, loss_gradient, mse, smoothness
from .metrics import MetricReport, dice, evaluate, evaluate_field, ssim_region
from .phantom import AnalyticDeformation, PhantomSpec, apply_analytic, generate
from .registration import (
    RegistrationConfig,
    RegistrationResult,
    register_pair,
    register_stage1_only,
    schedule_alpha,
)
from .volume import Volume, normalize_intensities, sample_nearest, sample_trilinear
from .warp import compose_dstn, jacobian_nonpositive_fraction, warp, warp_twice
