"""Entry point for parallel-seed worker processes.

Imported fresh in every spawned worker, so thread pinning happens before
numpy initializes BLAS: tiny matrices gain nothing from BLAS threads, and
oversubscription across workers would be a net loss.
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")


def run_one_seed(config_text: str, seed: int, out_dir: str) -> str:
    from .config import parse_config
    from .harness import run_seed

    return run_seed(parse_config(config_text), seed, out_dir)
