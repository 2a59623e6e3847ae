import sys

from embexport.cli import main

sys.exit(main())
