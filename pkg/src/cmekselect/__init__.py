"""cmekselect: pick the best source domain(s) for training a text
classifier on an unlabeled target domain.

Candidate source domains are scored by a learned non-negative linear
combination of four statistical distances between domain marginals
(chi-square, MMD, EMD, KL), the source's inner-domain error, and a
constant; the combination is fit by least-absolute-deviation regression on
leave-one-out pairs over the candidates. A benchmark harness evaluates the
selection against random, optimal, and all-domains baselines.
"""

from .bench import (
    RunResult,
    SelectionReport,
    emit_report,
    outer_loo_benchmark,
    paired_ttest,
    random_baseline,
)
from .classifier import (
    ErrorEstimate,
    Hypothesis,
    TrainConfig,
    classify,
    cross_error,
    inner_error,
    train,
)
from .cmek import (
    FEATURE_ORDER,
    DistanceFeatureVector,
    DomainCache,
    PredictorWeights,
    TrainingPair,
    assemble_features,
    build_loo_training_set,
    fit_weights,
    predict,
    select,
    union_corpus,
)
from .corpus import (
    Document,
    LabeledCorpus,
    SplitSpec,
    load_corpus,
    load_manifest,
    preprocess,
    save_corpus,
    stratified_folds,
)
from .distances import (
    DistanceConfig,
    DistanceVector,
    chi2_divergence,
    distance_vector,
    emd,
    kl_divergence,
    mmd,
    smooth,
)
from .features import (
    DocVectorMatrix,
    FeatureDistribution,
    Vocabulary,
    build_vocabulary,
    feature_distribution,
    tfidf_vectorize,
    top_k_support,
)
from .synthgen import DomainSpec, generate_family
from .cli import GlobalConfig

__version__ = "0.1.0"
