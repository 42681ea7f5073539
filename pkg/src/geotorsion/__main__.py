import sys

from geotorsion.cli import main

sys.exit(main())
