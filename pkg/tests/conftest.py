import os

# Pin BLAS to one thread before numpy loads anywhere: the acceptance budgets
# are stated single-threaded and bitwise determinism checks compare runs
# within one process.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
