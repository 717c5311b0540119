"""Angular loss for deep metric learning, with N-pair sampling, a small
trainer and a retrieval/clustering evaluation harness."""

__version__ = "0.1.0"

from .errors import (
    AngularMetricError,
    InvalidInputError,
    NumericalError,
    ParseError,
    SamplingError,
)
from .geometry import (
    TriangleGeometry,
    Triplet,
    angular_constraint_satisfied,
    positive_center,
    triangle_geometry,
    triplet_constraint_satisfied,
)
from .losses import (
    AngularParams,
    LossResult,
    angular_loss,
    angular_loss_batch,
    combined_loss_batch,
    f_apn,
    finite_difference_gradient,
    npair_loss_batch,
    triplet_loss,
    triplet_loss_batch,
)
from .sampling import LabeledDataset, NPairBatch, sample_disjoint_triplets, sample_npair_batch
from .training import EncoderModel, TrainConfig, generate_synthetic, l2_normalize, train
from .evaluation import MetricReport, evaluate, kmeans, nmi, pairwise_f1, recall_at_r, split_by_class
