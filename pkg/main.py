"""
IMU technique benchmark - command-line entry point

    python main.py run --config benchmark.yaml
    python main.py report --results results/results.jsonl --out results/report
    python main.py summarize-dataset --name uci_har --root data/uci_har
"""
import sys

from app.api.cli import main

if __name__ == "__main__":
    sys.exit(main())
