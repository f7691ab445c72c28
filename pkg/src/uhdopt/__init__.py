"""Optimal temporal-weight extraction for pulsed homodyne detection."""

from .circuit import (CircuitParams, DerivedParams, LOConfig, PRESETS, derive_params,
                      electronic_psd, impulse_response, lo_photon_number, preset)
from .errors import (AccuracyError, ConditioningError, ConfigError, DomainError,
                     EstimationError, FormatError, ShapeError, UHDError)
from .estimate import estimate_kernel, offset_correct, pulse_overlay
from .kernels import (KernelMatrix, Role, SamplingGrid, add, build_E, build_R,
                      build_R_crosstalk, db, efficiency_from_snr, eig_decompose, from_db,
                      snr_of_weight, subtract)
from .optimize import (TruncationBasis, WeightVector, constant_weight, crosstalk_coeffs,
                       fourier_basis, optimize_weight, peak_weight, snr_vs_cutoff)
from .pipeline import (OutcomeSeries, SqueezingReport, apply_weight, corr_d, infer_eta_r,
                       normalize, predict_improved, sideband, squeezing_enhancement,
                       squeezing_levels, stats, wigner_enhancement, wigner_origin)
from .resample import ResampleConfig, align, estimate_drift
from .synth import StateSpec, TraceSet, synth_electronic, synth_quadratures, synth_trace

__version__ = "0.1.0"
