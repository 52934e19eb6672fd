"""Meta label correction: a classifier and a label correction network trained
jointly by bi-level optimization with k-step look-ahead meta-gradients."""

from .bilevel import (
    METHODS,
    MLCModel,
    MetaGradState,
    TrainConfig,
    TrainResult,
    accumulate_meta_grad,
    main_step,
    meta_loss_grad,
    meta_step,
    mixed_hvp_fd,
    split_clean_batch,
    train,
    train_mlc,
)
from .data import DatasetBundle, LabeledSet, TrainingData, batch_iter, gen_blobs, load_csv, make_bundle
from .diffcore import ParamVector
from .metrics import evaluate
from .models import Classifier, ClassifierConfig, LabelCorrectionNet, LcnConfig, soft_cross_entropy
from .noise import FLIP, UNIF, NoiseSpec, empirical_corruption_matrix, inject_flip, inject_unif

__version__ = "0.1.0"
