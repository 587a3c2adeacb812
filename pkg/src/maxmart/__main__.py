import sys

from maxmart.cli import main

sys.exit(main())
