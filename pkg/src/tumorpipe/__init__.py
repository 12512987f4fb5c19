"""Texture/shape feature extraction, feature selection, PCA/LDA reduction and
SMO-trained SVM classification for grayscale images, with a batch CLI."""

from .dataset import LabeledDataset, read_feature_csv, stratified_folds, write_feature_csv
from .evaluation import compare_methods, cross_validate, paper_rates
from .features import ExtractionConfig, FeatureVector, extract_all, glcm, texture_features
from .imaging import load_pgm, parse_pgm, preprocess, write_pgm
from .modelfile import CorruptModelError
from .pipeline import FittedPipeline, PipelineConfig, fit_pipeline, parse_config
from .reduce import lda_fit, pca_fit
from .selection import forward_select, svm_rfe, ttest_rank
from .svm import ConvergenceError, KernelSpec, train_binary, train_multiclass

__version__ = "0.1.0"
