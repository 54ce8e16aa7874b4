import sys

from medimpute.cli import main

sys.exit(main())
