"""Allow ``python -m active_nav``."""

import sys

from .cli import main

sys.exit(main())
