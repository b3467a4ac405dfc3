"""Entry point for running the workbench as a module.

Usage:
    python -m mhdiffusion_bench simulate --config mhdiffusion_bench/scenarios/tree8.json
"""

from .cli import main

if __name__ == "__main__":
    exit(main())
