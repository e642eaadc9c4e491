import sys

from torch_lencon.cli import main

sys.exit(main())
