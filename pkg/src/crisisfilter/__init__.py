"""Multimodal relevancy classification for crisis social-media streams.

Text (bag-of-words, tf-idf, pooled word embeddings, count features) and
precomputed image features are reduced per block with truncated SVD, fused
by concatenation, and classified with either logistic regression or a
from-scratch histogram GBDT with one-side sampling and feature bundling.
"""

from .corpus import (
    Corpus,
    CorpusFormatError,
    Post,
    SplitIndices,
    TokenizedDoc,
    load_corpus,
    load_stopwords,
    preprocess,
    save_corpus,
    split,
    tokenize_corpus,
)
from .eval import (
    Confusion,
    EvalReport,
    PipelineSettings,
    SchemeId,
    SchemeResources,
    accuracy,
    auc,
    report_table,
    run_scheme,
    write_report_tsv,
)
from .fusion import FeatureBlock, FusedVector, SvdProjector, fuse, fuse_matrix, svd_fit, svd_project
from .gbdt import GbdtConfig, GbdtModel, bin_features, efb_bundle, goss_sample
from .image_features import ImageCoverage, ImageFeatureTable, load_image_features, post_image_vector
from .linear import LogRegModel, lr_predict, lr_train
from .text_features import (
    EmbeddingTable,
    SparseVector,
    Vocabulary,
    bow_vector,
    build_vocab,
    handcrafted_features,
    load_embeddings,
    pool_embeddings,
    tfidf_vector,
)

__version__ = "0.1.0"
