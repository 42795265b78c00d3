# Entry point for the prosody modification toolkit.
# Loads environment variables, configures logging and hands argv to the click command group.

import logging
import os
import sys

from dotenv import load_dotenv

from handlers.cli import dispatch

# Load environment variables from .env file
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging() -> None:
    level_name = os.getenv("PROSODY_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


if __name__ == "__main__":
    configure_logging()
    sys.exit(dispatch(sys.argv[1:]))
