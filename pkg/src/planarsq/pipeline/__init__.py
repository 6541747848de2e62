"""Synthetic QND measurement records and their analysis."""

from .analyze import GroupResult, PipelineReport, analyze_group, analyze_run, estimate_pairs, load_groups
from .estimate import (
    AtomicCovariance,
    SegmentFit,
    bootstrap,
    calibrate_fid,
    conditional_covariance,
    fit_fid_segment,
    subtract_readout_noise,
)
from .generate import NoiseModel, SyntheticConfig, SyntheticRun, generate_synthetic_run
from .model import FidModelParams, MeasurementRecord, RunMetadata, read_run, write_run
