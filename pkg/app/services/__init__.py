# This file makes this directory a Python package.
# Business logic: ingestion, signal processing, the numpy network and the runner.
