#!/usr/bin/env python3
"""
Main entry point for the steepness certifier.
"""
import sys
import logging

from steep import __version__
from steep.cli import configure_logging, main as cli_main
from steep.config import config


configure_logging(config)
logger = logging.getLogger(__name__)


def main():
    """Log the active configuration, then run the command line."""
    logger.info("=" * 60)
    logger.info(f"Steepness Certifier {__version__}")
    logger.info("=" * 60)
    logger.info("Configuration:")
    logger.info(f"  - Mode: {config.mode}")
    logger.info(f"  - Starts per search: {config.starts}")
    logger.info(f"  - Seed: {config.seed}")
    logger.info(f"  - Threads: {config.threads}")
    logger.info(f"  - Certification budget: {config.max_cells} cells")

    try:
        return cli_main(sys.argv[1:])
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        return 1


if __name__ == '__main__':
    sys.exit(main())
