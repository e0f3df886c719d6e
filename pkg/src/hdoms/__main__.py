import sys

from hdoms.cli import main

sys.exit(main())
