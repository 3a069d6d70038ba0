"""Run: python -m mmkg_align align --data D --out O"""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
