import sys

from evmforge.cli import main

sys.exit(main())
