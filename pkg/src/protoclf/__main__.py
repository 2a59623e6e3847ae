import sys

from protoclf.cli import main

sys.exit(main())
