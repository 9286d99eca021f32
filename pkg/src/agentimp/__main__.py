import sys

from agentimp.cli import main

sys.exit(main())
