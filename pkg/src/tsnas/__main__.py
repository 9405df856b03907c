"""python -m tsnas: pin BLAS threads before numpy loads, then dispatch."""

import os
import sys

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from .cli import main  # noqa: E402

sys.exit(main())
