"""``python -m shell6p`` dispatches to the command line interface."""

import sys

from .cli import main

sys.exit(main())
