import logging
import sys
from colorama import Fore, Style, init

# Initialize colorama
init()

# Third-party libraries stay at WARNING; logs go to stderr so stdout can carry CSV/JSONL
logging.basicConfig(
    level=logging.WARNING,
    format='%(message)s',
    stream=sys.stderr
)
logger = logging.getLogger("isetlab")
logger.setLevel(logging.INFO)


def set_verbosity(verbose: bool = False, quiet: bool = False) -> None:
    """Adjust the project logger from CLI flags; quiet wins over verbose."""
    if quiet:
        logger.setLevel(logging.WARNING)
    elif verbose:
        logger.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.INFO)


def log_failure(message: str) -> None:
    logger.error(f"{Fore.RED}{message}{Style.RESET_ALL}")
