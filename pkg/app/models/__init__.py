# This file makes this directory a Python package.
# Data models & schemas: signals, settings (pydantic) and experiment records.
