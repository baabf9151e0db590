"""
EHE command-line entry point
Usage: python src/backend/main.py <command> [options]
"""

import logging
import sys

from config.settings import settings

# Configure logging
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

from cli.commands import run_command  # noqa: E402


def main() -> int:
    return run_command(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
