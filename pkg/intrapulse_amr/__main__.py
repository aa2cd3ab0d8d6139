"""Run the pipeline with ``python -m intrapulse_amr``."""

import sys

from .cli import main

sys.exit(main())
