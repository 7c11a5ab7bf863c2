import os
import sys

# make the in-tree package importable without installation
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
