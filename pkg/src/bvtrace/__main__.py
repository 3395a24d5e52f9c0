"""Allow ``python -m bvtrace``."""

import sys

from .cli import main

sys.exit(main())
