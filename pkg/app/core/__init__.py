# This file makes this directory a Python package.
# Configuration, logging, errors, binary containers and report charts.
