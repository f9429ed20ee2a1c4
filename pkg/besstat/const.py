# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""Contains suite-level constants defined as globals"""

import os
from pathlib import Path

# The path under which run artifacts (reports, manifests, the results
# database) are written when neither the config nor --out names one
OUTPUT_DIR = Path(os.environ.get('BESSTAT_OUTPUT', Path.cwd() / 'besstat-out'))

# Numerical tolerances shared between modules
PROB_TOL = 1e-12           # atom probabilities must sum to 1 within this
MOMENT_TOL = 1e-8          # standardization checks in exact mode
MC_SIGMAS = 4              # standard errors allowed in Monte Carlo checks
DELTA_TOL = 1e-10          # bisection tolerance for delta
DEGENERACY_RTOL = 1e-9     # sigma1 relative to the second-moment scale
COND_LIMIT = 1e12          # condition number beyond which S^2 is singular
ZERO_VARIANCE_RTOL = 1e-12 # relative empirical variance treated as zero
ENUMERATION_LIMIT = 10**7  # joint atoms enumerated before MC fallback

# Defaults for shipped statistics and experiments
EPSILON = 0.5
SAFETY_FACTOR = 1.1
CERTIFY_POINTS = 100_000
BE_CONSTANT = 0.56
REPLICATES = 200_000
BOOTSTRAP = 500
N_GRID = (50, 100, 200, 400, 800, 1600, 3200)
Z_GRID = (-6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6)

# Upper bound on the number of floats drawn by a single simulation batch;
# batch sizes depend only on this and the statistic's shape so that worker
# counts never change the partition
BATCH_FLOATS = 2_000_000
