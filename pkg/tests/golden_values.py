"""Frozen regression values of the seeded golden run.

Recorded once from scripts/golden_run.py on the reference environment.
They pin exact empirical outcomes of a fully deterministic pipeline; if an
intentional change to the generator, training defaults or explanation
templates moves them, rerun the script and update these in the same commit.
"""

# GenConfig(n_series=1500, length=50, anomaly_fraction=0.15, seed=7),
# split fractions (1000/1500, 200/1500, 300/1500) with seed 7,
# default architecture, init seed 1, default TrainConfig.
GOLDEN_N_SERIES = 1500
GOLDEN_SEED = 7
GOLDEN_SPLIT_SEED = 7
GOLDEN_INIT_SEED = 1
GOLDEN_FRACTIONS = (1000 / 1500, 200 / 1500, 300 / 1500)

# sha256 of the wide-CSV serialization of the full golden dataset.
GOLDEN_DATASET_SHA256 = "ba6c8771929264a038a911164ec68093ac19a03cfc6d3814cae71073838f8ca3"
# sha256 of the n_series=10, anomaly_fraction=0.2, seed=7 dataset CSV.
SMALL_DATASET_SHA256 = "626b4c1b6000120084e95852300ff77b9ce2405d6de16eef6db992c9685208fc"

GOLDEN_VAL_ACCURACY = 0.98
GOLDEN_TEST_ACCURACY = 0.97

# window -> (n_anomalous_correct, n_flipped)
GOLDEN_FLIPS = {1: (36, 27), 3: (36, 30)}

# First correctly classified anomalous series of the golden test split.
GOLDEN_ANOMALOUS_ID = 31
