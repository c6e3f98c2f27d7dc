"""python -m seafloor"""
import sys

from seafloor.cli import main

if __name__ == "__main__":
    sys.exit(main())
