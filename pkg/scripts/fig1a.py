"""Sum rate versus transmit SNR: optimized 1-bit DMA against fully digital.

K=2, N_d=5, N_e=10, rho in {-10, ..., 25} dB. Extra flags are forwarded to
``onebit-dma sweep-snr`` (e.g. ``--trials 50 --eval-stats approx``).

    python scripts/fig1a.py --out fig1a.csv
"""
import sys

from onebit_dma.cli import main

DEFAULTS = ["sweep-snr", "--k", "2", "--nd", "5", "--ne", "10", "--grid=-10:25:5",
            "--arms", "dma-sdr,dma-closed-form,dma-random,fd"]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
