"""scikit-learn compatible wrapper around the selection procedure.

``X`` is a sequence of ``(csd, ssd)`` annotation pairs, one per recording,
and ``y`` (when given) marks recordings whose separation output is worse
than the clustering output.  Because thresholds are plain constructor
parameters, the estimator plugs into ``GridSearchCV`` for tuning them on a
development set.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .selector import TABLE_MODES, CombinationMode, combine_flags
from .strategies import Thresholds, all_verdicts
from .validation import check_labels, check_utterance_pairs


class SGSDSelector(ClassifierMixin, BaseEstimator):
    """Flag poorly separated recordings and pick CSD or SSD per recording.

    Parameters
    ----------
    th1, th2, th3 : float
        Thresholds of the balance, overlap-ratio and deviation checks.
    mode : str
        One of ``S1``, ``S2``, ``S3``, ``S1_AND_2``, ``VOTE_1_2_3``.

    Attributes
    ----------
    thresholds_ : Thresholds
    mode_ : CombinationMode
    classes_ : ndarray of bool
    """

    def __init__(self, th1=0.40, th2=0.20, th3=0.26, mode="S3"):
        self.th1 = th1
        self.th2 = th2
        self.th3 = th3
        self.mode = mode

    def fit(self, X, y=None):
        pairs = check_utterance_pairs(X)
        if y is not None:
            check_labels(y, len(pairs))
        self.mode_ = CombinationMode.parse(self.mode)
        if self.mode_ not in TABLE_MODES:
            raise ValueError("ORACLE mode needs a reference and is not available here")
        self.thresholds_ = Thresholds(self.th1, self.th2, self.th3)
        self.classes_ = np.array([False, True])
        self.n_recordings_ = len(pairs)
        return self

    def statistics(self, X) -> np.ndarray:
        """Raw statistic of each check, shape ``(n_recordings, 3)``."""
        rows = []
        for csd, ssd in check_utterance_pairs(X):
            rows.append([v.statistic for v in all_verdicts(ssd, csd).values()])
        return np.array(rows, dtype=np.float64)

    def predict(self, X) -> np.ndarray:
        """Boolean poor-separation flag per recording."""
        check_is_fitted(self, "thresholds_")
        flags = []
        for csd, ssd in check_utterance_pairs(X):
            flags.append(combine_flags(all_verdicts(ssd, csd, self.thresholds_), self.mode_))
        return np.array(flags, dtype=bool)

    def transform(self, X) -> list:
        """Selected annotation per recording (CSD when flagged, else SSD)."""
        pairs = check_utterance_pairs(X)
        flags = self.predict(pairs)
        return [csd if f else ssd for (csd, ssd), f in zip(pairs, flags)]

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
