"""``python -m oscitime``."""

import sys

from .cli import main

sys.exit(main())
