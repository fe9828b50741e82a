import sys

from labeltest.cli import main

sys.exit(main())
