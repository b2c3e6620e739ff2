import sys

from cerank.cli import main

sys.exit(main())
