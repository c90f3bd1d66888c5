#!/usr/bin/env python
"""Command-line utility for the periodic chain solvers."""
import sys


def main():
    """Run a periodic_chain subcommand."""
    try:
        from periodic_chain.cli import main as run
    except ImportError as exc:
        raise ImportError(
            "Couldn't import periodic_chain's dependencies. Are numpy, scipy and "
            "python-dotenv installed and available on your PYTHONPATH? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    return run(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
