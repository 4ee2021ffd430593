import sys

from slotfill.cli import main

sys.exit(main())
