#!/usr/bin/env python3
"""
GyroLab command line.

    python main.py simulate --config configs/uniform.toml --out out/uniform
    python main.py sweep --model slab_gradB --metric first_order_gc --workers 4
    python main.py <command> --print-defaults

Exit codes: 0 success, 1 acceptance failure, 2 bad input, 3 numerical failure.
"""

from lab import main

if __name__ == "__main__":
    main()
