"""Curvelet-domain face recognition: FDCT via wrapping, PCA, k-NN/SVM and per-scale voting."""

from .classifiers import KnnClassifier, LabeledSet, OaaSvm, knn_predict, oaa_predict, oaa_train
from .ensemble import (PipelineConfig, Prediction, ScaleEnsembleModel, ensemble_predict,
                       ensemble_train, majority_vote)
from .fdct import (CurveletDecomposition, WindowFamily, build_windows, coefficient_magnitudes,
                   fdct_forward, fdct_inverse)
from .features import PcaModel, pca_fit, pca_project
from .imaging import Image, downsample, grayscale_convert, load_image, pad_to_even, quantize

__version__ = "0.1.0"
