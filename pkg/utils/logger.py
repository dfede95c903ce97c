"""
Logging configuration module.
Provides centralized logging functionality for the suite.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from config.config import Config


class Logger:
    """Custom logger class for the suite."""

    _loggers = {}

    @classmethod
    def get_logger(cls, name: str = __name__) -> logging.Logger:
        """
        Get or create a logger instance.

        Args:
            name: Logger name (typically __name__ of the module)

        Returns:
            Configured logger instance
        """
        if name in cls._loggers:
            return cls._loggers[name]

        logger = logging.getLogger(name)
        logger.setLevel(getattr(logging, Config.LOG_LEVEL))

        # Avoid adding handlers multiple times
        if not logger.handlers:
            console_handler = logging.StreamHandler(sys.stdout)
            console_handler.setLevel(logging.INFO)
            console_handler.setFormatter(logging.Formatter(
                Config.LOG_FORMAT,
                datefmt=Config.LOG_DATE_FORMAT
            ))

            file_handler = RotatingFileHandler(
                Config.get_log_path("safenet"),
                maxBytes=10*1024*1024,  # 10MB
                backupCount=5,
                encoding='utf-8'
            )
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter(
                "%(asctime)s - %(name)s - [%(levelname)s] - %(filename)s:%(lineno)d - %(message)s",
                datefmt=Config.LOG_DATE_FORMAT
            ))

            logger.addHandler(console_handler)
            logger.addHandler(file_handler)
            logger.propagate = False

        cls._loggers[name] = logger
        return logger

    @classmethod
    def log_run_start(cls, run_name: str):
        """
        Log run start with separator.

        Args:
            run_name: Name of the run (problem/method/schedule/seed)
        """
        logger = cls.get_logger()
        logger.info("=" * 80)
        logger.info(f"Starting Run: {run_name}")
        logger.info("=" * 80)

    @classmethod
    def log_run_end(cls, run_name: str, status: str):
        """
        Log run end with status.

        Args:
            run_name: Name of the run
            status: Run status (COMPLETED/DIVERGED)
        """
        logger = cls.get_logger()
        logger.info("=" * 80)
        logger.info(f"Run {run_name} - {status}")
        logger.info("=" * 80)

    @classmethod
    def log_phase(cls, phase: str, iteration: int):
        """
        Log an optimization phase transition.

        Args:
            phase: Phase label (e.g. "adam1", "lbfgs2")
            iteration: Global iteration at which the phase starts
        """
        logger = cls.get_logger()
        logger.info(f"PHASE: {phase} starts at iteration {iteration}")

    @classmethod
    def log_divergence(cls, phase: str, iteration: int, reason: str):
        """
        Log a divergence event.

        Args:
            phase: Phase label
            iteration: Global iteration of the non-finite loss or stall
            reason: Cause, usually the NonFiniteLossError message
        """
        logger = cls.get_logger()
        logger.warning(f"DIVERGED: {phase} at iteration {iteration} ({reason})")


# Convenience function
def get_logger(name: str = __name__) -> logging.Logger:
    """
    Get a logger instance.

    Args:
        name: Logger name

    Returns:
        Logger instance
    """
    return Logger.get_logger(name)
