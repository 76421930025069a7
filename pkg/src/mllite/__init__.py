from mllite.dataset import Dataset
from mllite.knn import knn_predict
from mllite.oversample import oversample
from mllite.scoring import metrics
from mllite.validation import cross_validate

__all__ = ["Dataset", "knn_predict", "metrics", "oversample", "cross_validate"]
