# This file makes this directory a Python package.
# It holds the command-line surface (cli.py).
