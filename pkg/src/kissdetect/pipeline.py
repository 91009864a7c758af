from sklearn.base import BaseEstimator

from .fusion import FusionHeadClassifier
from .segmentor import SceneSegmentor


class SceneDetector(BaseEstimator):
    """Per-second classifier followed by the segmentor.

    ``fit`` trains the head on labelled fused embeddings; ``predict`` takes
    the embeddings of one video (one row per second) and returns segments.
    """

    def __init__(self, classifier=None, segmentor=None):
        self.classifier = classifier
        self.segmentor = segmentor

    def _parts(self):
        clf = self.classifier if self.classifier is not None else FusionHeadClassifier()
        seg = self.segmentor if self.segmentor is not None else SceneSegmentor()
        return clf, seg

    def fit(self, X, y, **fit_params):
        self.classifier_, self.segmentor_ = self._parts()
        self.classifier_.fit(X, y, **fit_params)
        self.segmentor_.fit()
        return self

    def predict_labels(self, X):
        return self.classifier_.predict(X)

    def predict(self, X):
        return self.segmentor_.predict(self.predict_labels(X))
