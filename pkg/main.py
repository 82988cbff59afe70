#!/usr/bin/env python3
"""DagDelay - DAG-BFT latency simulator"""

import sys

from src.app import main

if __name__ == "__main__":
    sys.exit(main())
