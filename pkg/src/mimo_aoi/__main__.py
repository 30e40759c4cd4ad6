import sys

from mimo_aoi.cli import main

sys.exit(main())
