"""
Logging module for the meshgrade toolkit.

This module provides the logging setup used by the command-line application
for tracking pipeline stages, progress through long loops, and failures.
Library modules log through ``loguru.logger`` directly; their messages only
appear once a MeshLogger has been created.
"""
import os
import sys
import time

from loguru import logger

PACKAGE_NAME = __package__.rsplit('.', 1)[0]


class MeshLogger:
    """
    Custom logger for the meshgrade toolkit.

    Sends a compact console format to the diagnostic stream and, optionally,
    a detailed DEBUG log to a rotating file. Progress entries are filtered so
    long loops only report meaningful advances.
    """

    def __init__(self, log_file=None, log_level='INFO', progress_step=0.1):
        """
        Initialize logger with custom configuration.

        Args:
            log_file (str): File name under ``logs/``. Defaults to None (console only)
            log_level (str): Console logging level. Defaults to 'INFO'
            progress_step (float): Minimum fraction of progress between two
                                   logged progress entries of one stage
        """
        self.logger = logger
        self.logger.remove()
        self.logger.enable(PACKAGE_NAME)

        self.logger.add(
            sink=sys.stderr,
            format="<level>{time:HH:mm:ss} | {level} | {message}</level>",
            level=log_level,
            diagnose=False
        )

        if log_file:
            os.makedirs('logs', exist_ok=True)
            self.logger.add(
                sink=os.path.join('logs', log_file),
                rotation="1 MB",
                compression="zip",
                format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{line} | {message}",
                level="DEBUG",
                diagnose=False
            )

        self.progress_step = progress_step
        self.start_time = time.time()
        self._last_progress = {}

    def _should_log_progress(self, stage, fraction):
        """
        Determine if progress of a stage advanced enough to be logged.

        Args:
            stage (str): Name of the pipeline stage
            fraction (float): Completed fraction in [0, 1]

        Returns:
            bool: Whether the entry should be logged
        """
        last = self._last_progress.get(stage)
        if last is None or fraction >= 1.0:
            return True
        return fraction - last >= self.progress_step

    def log_progress(self, stage, done, total):
        """
        Log progress through a stage of known length.

        Args:
            stage (str): Name of the pipeline stage
            done (int): Completed units
            total (int): Total units
        """
        fraction = done / total if total else 1.0
        if not self._should_log_progress(stage, fraction):
            return
        self._last_progress[stage] = fraction
        elapsed = time.time() - self.start_time
        self.logger.info(f"{stage}: {done}/{total} ({fraction:.0%}) | {elapsed:.1f}s")
        if fraction >= 1.0:
            self._last_progress.pop(stage, None)

    def log_event(self, event_type, details):
        """
        Log a discrete pipeline event.

        Args:
            event_type (str): Type of event
            details (str): Event details
        """
        self.logger.info(f"{event_type} | {details}")

    def exception(self, error):
        """
        Log an exception with its traceback to the file sink.

        Args:
            error (Exception): Exception to log
        """
        self.logger.opt(exception=error).debug(f"{type(error).__name__}: {error}")
