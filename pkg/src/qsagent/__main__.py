import sys

from qsagent.cli import main

sys.exit(main())
