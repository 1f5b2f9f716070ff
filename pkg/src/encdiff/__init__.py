"""Partially encrypted latent diffusion denoising.

Latents are split by a distortion criterion into a high-information part
that travels encrypted (CKKS-style, SIMD-packed sparse values) and a
residual that stays plaintext; the denoising step costs one ciphertext
multiply and one add per iteration.  A bit-exact mock backend mirrors the
real one for oracle testing.
"""

__version__ = "0.1.0"

from .denoise import LatentImage, Schedule, StepCoefficients, make_schedule
from .he import CkksBackend, HeParams, MockBackend, make_backend
from .metrics import MetricReport, metric_report
from .roles import RunReport, SessionConfig
from .sampler import sample_plain, sample_private
from .session import run_session
