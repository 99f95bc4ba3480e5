"""
Logging Configuration for the SSRT pipeline

This module provides centralized logging configuration with support for:
- Different log levels for console and file output
- Environment variable configuration
- Run and chain summary helpers
- Optional verbose mode for debugging
"""

import logging
import os
import sys
from typing import Optional, Sequence


class SsrtLogger:
    """Centralized logger configuration for the SSRT pipeline"""
    _instance = None

    def __new__(cls, *args, **kwargs):
        if cls._instance is None:
            cls._instance = super(SsrtLogger, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        # Prevent re-initialization if already initialized
        if hasattr(self, '_initialized') and self._initialized:
            return
        self.logger = None
        self._setup_logging()
        self._initialized = True

    def _setup_logging(self):
        """Setup logging configuration based on environment variables and defaults"""

        log_level = os.getenv('SSRT_LOG_LEVEL', 'INFO').upper()
        console_level = os.getenv('SSRT_CONSOLE_LOG_LEVEL', 'WARNING').upper()
        file_level = os.getenv('SSRT_FILE_LOG_LEVEL', log_level).upper()
        log_file = os.getenv('SSRT_LOG_FILE')
        verbose_mode = os.getenv('SSRT_VERBOSE', 'false').lower() == 'true'

        if verbose_mode:
            console_level = 'DEBUG'
            file_level = 'DEBUG'

        self.logger = logging.getLogger('ssrt')
        self.logger.setLevel(logging.DEBUG)  # handlers filter
        self.logger.propagate = False
        self.logger.handlers.clear()

        detailed_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
        )
        simple_formatter = logging.Formatter(
            '%(asctime)s - %(levelname)s - %(message)s'
        )

        # stdout is reserved for results
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(getattr(logging, console_level))
        console_handler.setFormatter(simple_formatter)
        self.logger.addHandler(console_handler)

        if log_file:
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(getattr(logging, file_level))
            file_handler.setFormatter(detailed_formatter)
            self.logger.addHandler(file_handler)

        self.logger.debug(f"Logging initialized - Console: {console_level}, File: {file_level if log_file else 'off'}")
        if verbose_mode:
            self.logger.debug("Verbose mode enabled")

    def get_logger(self, name: Optional[str] = None) -> logging.Logger:
        """Get a logger instance"""
        if name:
            return logging.getLogger(f'ssrt.{name}')
        return self.logger

    def log_run_summary(self, subcommand: str, seed: Optional[int], extra: str = ""):
        """Log a one-line summary of a CLI run"""
        extra_info = f" - {extra}" if extra else ""
        self.logger.info(f"Run: {subcommand} - seed: {seed}{extra_info}")

    def log_chain_summary(self, label: str, acceptance: Sequence[float], rhat: Sequence[float]):
        """Log acceptance rates and the worst R-hat of a finished sampler run"""
        worst = max(rhat) if len(rhat) else float('nan')
        rates = ", ".join(f"{a:.2f}" for a in acceptance)
        self.logger.info(f"Chains: {label} - acceptance [{rates}] - max R-hat {worst:.3f}")


# Global logger instance
_ssrt_logger = SsrtLogger()

def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Get the SSRT pipeline logger"""
    return _ssrt_logger.get_logger(name)

def log_run_summary(subcommand: str, seed: Optional[int], extra: str = ""):
    """Log a summary of a CLI run"""
    _ssrt_logger.log_run_summary(subcommand, seed, extra)

def log_chain_summary(label: str, acceptance: Sequence[float], rhat: Sequence[float]):
    """Log a summary of a sampler run"""
    _ssrt_logger.log_chain_summary(label, acceptance, rhat)