"""Factorized device models and synthetic current datasets for NILM evaluation."""

__version__ = "0.1.0"

from .factorize import (  # noqa: F401
    CurrentMatrix,
    FactorModel,
    SignatureBank,
    SolverOptions,
    infer_activations,
    nnls,
    reconstruction_snr,
    select_k,
    snmf,
    train_category,
)
from .stats import MetricReport, PowerSeries, metric_report, power_from_current, thd  # noqa: F401
