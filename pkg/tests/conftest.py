import os
import sys

# Make tests/_oracles.py importable regardless of pytest rootdir handling.
sys.path.insert(0, os.path.dirname(__file__))
