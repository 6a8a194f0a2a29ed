import sys

from kernelizer.cli import main

sys.exit(main())
