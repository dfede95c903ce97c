"""
Custom decorators module.
Provides decorators for logging, timing, retry logic and Allure steps.
"""

import functools
import logging
import time
import allure
from utils.logger import get_logger

logger = get_logger(__name__)


def log_action(func=None, *, level: int = logging.INFO):
    """
    Decorator to log function entry, exit and errors.

    Usable bare (`@log_action`) or with a level (`@log_action(level=logging.DEBUG)`).

    Args:
        func: Function to decorate
        level: Level for the entry and exit records; errors always log at ERROR

    Returns:
        Wrapped function
    """
    def decorator(inner):
        @functools.wraps(inner)
        def wrapper(*args, **kwargs):
            name = inner.__qualname__
            logger.log(level, f"Executing: {name}")
            try:
                result = inner(*args, **kwargs)
            except Exception as e:
                logger.error(f"Error in {name}: {type(e).__name__}: {e}")
                raise
            logger.log(level, f"Completed: {name}")
            return result

        return wrapper

    return decorator(func) if func is not None else decorator


def retry(max_attempts: int = 3, delay: float = 1.0, exceptions: tuple = (Exception,)):
    """
    Decorator to retry a function on failure.

    Args:
        max_attempts: Maximum number of attempts
        delay: Delay between retries in seconds
        exceptions: Tuple of exceptions to catch

    Returns:
        Decorator function
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            attempts = 0
            while True:
                try:
                    return func(*args, **kwargs)
                except exceptions as e:
                    attempts += 1
                    if attempts >= max_attempts:
                        logger.error(
                            f"{func.__name__} failed after {max_attempts} attempts: {e}"
                        )
                        raise
                    logger.warning(
                        f"{func.__name__} failed (attempt {attempts}/{max_attempts}), "
                        f"retrying in {delay}s: {e}"
                    )
                    time.sleep(delay)

        return wrapper

    return decorator


def allure_step(step_title: str = None):
    """
    Decorator to wrap a call in an Allure step.

    Outside a test session the step is a no-op context.

    Args:
        step_title: Custom step title (uses function name if not provided)

    Returns:
        Decorator function
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            title = step_title or func.__name__.replace('_', ' ').title()
            with allure.step(title):
                return func(*args, **kwargs)

        return wrapper

    return decorator


def measure_time(func):
    """
    Decorator to measure wall-clock time of a call.

    The duration of the latest call is kept on `wrapper.last_elapsed`.

    Args:
        func: Function to decorate

    Returns:
        Wrapped function
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            wrapper.last_elapsed = time.perf_counter() - start_time
            logger.info(f"{func.__name__} executed in {wrapper.last_elapsed:.2f} seconds")

    wrapper.last_elapsed = None
    return wrapper
