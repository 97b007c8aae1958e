#!/usr/bin/env python3
"""
Entry point for the qensemble command line
Puts the backend package on the path and hands over to the CLI
"""

import sys
from pathlib import Path

backend_dir = Path(__file__).parent / "backend"
sys.path.insert(0, str(backend_dir))

if __name__ == "__main__":
    from app.cli import main

    main()
