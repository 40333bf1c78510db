"""Module entry point so ``python -m transport_spectra`` works."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
