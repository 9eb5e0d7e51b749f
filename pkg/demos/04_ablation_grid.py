"""Architecture ablation: cell type x convolutional front end.

Runs the full 3x2 grid (rnn/lstm/gru, each with and without the conv
layers) on a small synthetic cohort and prints the comparison table.
The conv front end strides over the input, so its cells see sequences
roughly an eighth as long; watch the sec/epoch column.
"""

from pendetect.evaluation import SplitPlan, run_ablation_grid
from pendetect.features import FeatureGroupSelection
from pendetect.nn import TrainConfig
from pendetect.signal_io import generate_synthetic

sequences = generate_synthetic(
    n_subjects_per_class=8,
    length_range=(100, 160),
    class_separation=1.0,
    seed=5,
)

report = run_ablation_grid(
    sequences,
    FeatureGroupSelection.of("derived"),
    TrainConfig(epochs=5, early_stop_patience=None, seed=5),
    SplitPlan.kfold(4, seed=5),
)

print(report.to_table())
