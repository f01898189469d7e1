"""Pin BLAS to one thread per process before numpy loads.

The optimizer's matrices are tiny (N <= 80); multi-threaded BLAS only adds
contention, and the harness parallelizes at the trial level instead.
"""

import os

for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
