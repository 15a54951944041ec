"""Principal word vectors: contextual matrices, generalized PCA and evaluation."""

__version__ = "0.1.0"

from .coocmat import SparseCountMatrix, combine_union, combine_window, count_matrix, window_weights
from .corpus import Corpus, NormalizationRules, Vocabulary, build_vocabulary, load_corpus
from .evaluation import eigen_report, fdr, log_generalized_variance, word_similarity
from .features import ContextFn, FeatureSpace, build_feature_space
from .gpca import (Embeddings, FeatureSpec, GeneralizedPCA, GpcaParams, LambdaSpec, gpca,
                   pmi_matrix, principal_word_vectors)
from .linalg import SketchParams, centered_svd, qr_rank_one_update
from .transform import AnnealParams, EntropyPowerTransformer, TransformSpec, apply_transform, tune_power


def data_path(name: str) -> str:
    """Filesystem path of a bundled data file."""
    from importlib.resources import files

    return str(files(__name__) / "data" / name)
