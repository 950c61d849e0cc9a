"""Allows ``python -m exmart``."""

import sys

from exmart.cli import main

sys.exit(main())
