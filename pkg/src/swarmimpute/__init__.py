"""Missing-value imputation with autoencoders and a firefly search."""
from .dataset import MaskedDataset, inject, load_idx_images, load_idx_labels, normalize
from .deepnet import FineTuneConfig, Network, build_mlp_ae, fine_tune, train_conjugate_gradient, unroll
from .evaluate import ImputationReport, aggregate, compare, mean_imputation_baseline
from .firefly import FireflyConfig, OptimizationResult, optimize
from .imputer import impute_dataset, impute_sample
from .rbm import CdConfig, Rbm, train_rbm, train_stack

__version__ = "0.1.0"
