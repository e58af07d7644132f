import logging
import sys

LOG_LEVELS = {
    1: logging.CRITICAL,
    2: logging.ERROR,
    3: logging.WARNING,
    4: logging.INFO,
    5: logging.DEBUG,
}


def setup_logging(verbose: int = 4, stream=None) -> logging.Logger:
    """
    Setup logging to print to stdout (or ``stream``) with configurable verbosity.

    Parameters
    ----------
    verbose : int, optional
        1 (critical only) to 5 (debug), by default 4.
    stream : file-like, optional
        Destination of the handler, by default sys.stdout.

    Returns
    -------
    logging.Logger
        The package logger.
    """
    level = LOG_LEVELS.get(verbose, None)
    if level is None:
        raise ValueError("Maximum verbosity is -vvvvv (verbose=5)")

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    if not root_logger.handlers:
        handler = logging.StreamHandler(stream or sys.stdout)
        formatter = logging.Formatter("%(asctime)s %(name)s [%(levelname)s]: %(message)s")
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)

    return logging.getLogger("trefftz_dg")
