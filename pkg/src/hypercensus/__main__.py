import sys

from .censusctl import main

sys.exit(main())
