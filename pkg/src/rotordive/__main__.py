import sys

from rotordive.cli import main

sys.exit(main())
