"""
Utility modules for the diffusion workbench.

This package contains utility functions and monitoring:
- helpers: dB conversion, formatting, PSD test
- logger: Structured logging system
- monitor: Solver / simulation timing
"""

from mhdiffusion.utils.helpers import to_db, from_db, format_db, min_eigenvalue_is_psd
from mhdiffusion.utils.logger import setup_logger, log_run_details
from mhdiffusion.utils.monitor import monitor, PerformanceMonitor

__all__ = [
    "to_db",
    "from_db",
    "format_db",
    "min_eigenvalue_is_psd",
    "setup_logger",
    "log_run_details",
    "monitor",
    "PerformanceMonitor"
]
