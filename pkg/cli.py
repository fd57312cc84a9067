#!/usr/bin/env python3
"""
CLI launcher for witten_rates
Runs the package's subcommands from a source checkout
"""

import sys

from witten_rates.cli import main

if __name__ == "__main__":
    sys.exit(main())
