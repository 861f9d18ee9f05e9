# This file makes the 'app' directory a Python package.
# The command line lives in app/api/cli.py; root main.py only forwards to it.
