#!/usr/bin/env python3
"""Sweep removal thresholds and record leakage indicators to sweep.csv.

Shows the security/efficiency trade: as the threshold grows the plaintext
residual picks up more of the original tensor (cos(X,Z) rises) while the
encrypted part keeps less (cos(X,Y) falls).
"""

import sys

from encdiff.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or [
        "--thresholds", "0.001,0.005,0.01,0.05,0.1,0.2,0.3",
        "--latents", "5",
        "--out", "outputs/sweep",
    ]
    sys.exit(main(["sweep", *args]))
