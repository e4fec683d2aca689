import logging
import sys
import os

# Global variables to control the verbosity level and where to log
verbose_level = 1       # Global variable to control the verbosity level (0: DEBUG, 1: INFO, 2: WARNING, 3: ERROR)
log_to_terminal = True  # Whether to log to terminal (stderr, stdout carries command output)
log_to_file = False     # Whether to log to a file (factcurve.log)
log_file_path = "logs/factcurve.log"  # Specify the desired log file location

LOGGER_NAME = "factcurve"

# Log levels mapping
log_levels = {
    0: logging.DEBUG,
    1: logging.INFO,
    2: logging.WARNING,
    3: logging.ERROR
}


def set_verbosity(level):
    """Changes the verbosity of the already configured logger (0: DEBUG .. 3: ERROR)."""
    global verbose_level
    verbose_level = level
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(log_levels.get(level, logging.INFO))
    for handler in logger.handlers:
        handler.setLevel(log_levels.get(level, logging.INFO))


# Set up logging
def setup_logger():
    level = log_levels.get(verbose_level, logging.INFO)  # Default to INFO if invalid level

    # Create the logger
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)

    # Handlers are attached once per process
    if logger.handlers:
        return logger

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    # Add terminal logging handler
    if log_to_terminal:
        terminal_handler = logging.StreamHandler(sys.stderr)
        terminal_handler.setLevel(level)
        terminal_handler.setFormatter(formatter)
        logger.addHandler(terminal_handler)

    # Add file logging handler
    if log_to_file:
        # Create the logs directory if it doesn't exist
        if not os.path.exists(os.path.dirname(log_file_path)):
            os.makedirs(os.path.dirname(log_file_path))
        file_handler = logging.FileHandler(log_file_path)
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger
