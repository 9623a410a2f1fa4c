"""The six feature extractors and feature-matrix utilities."""
from .embeddings import (EmbeddingModel, embed_document, embed_documents, train_cbow_embeddings,
                         train_subword_embeddings)
from .matrix import SET_NAMES, FeatureMatrix, MinMaxScaler, concatenate, minmax_scale, read_fmat, write_fmat
from .stats import STAT_COLUMNS, StatVector, compute_stat_features, stat_matrix
from .tfidf import (CountModel, TfidfModel, apply_ngram_counts, apply_tfidf, fit_char_tfidf, fit_ngram_counts,
                    fit_word_tfidf)

__all__ = [
    "SET_NAMES", "FeatureMatrix", "MinMaxScaler", "concatenate", "minmax_scale", "read_fmat", "write_fmat",
    "TfidfModel", "CountModel", "fit_word_tfidf", "fit_char_tfidf", "apply_tfidf", "fit_ngram_counts",
    "apply_ngram_counts", "EmbeddingModel", "train_cbow_embeddings", "train_subword_embeddings",
    "embed_document", "embed_documents", "StatVector", "STAT_COLUMNS", "compute_stat_features", "stat_matrix",
]
