"""Input checks shared by the estimator classes."""
from __future__ import annotations

from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted as _sk_check_is_fitted

from .exceptions import InvalidArgumentError
from .measures import AtomicMeasure, MeasurePath
from .spaces import MetricSpace


def check_space(space) -> MetricSpace:
    if not isinstance(space, MetricSpace):
        raise InvalidArgumentError(f"expected a MetricSpace, got {type(space).__name__}")
    return space


def check_measure(mu, space=None) -> AtomicMeasure:
    """Return ``mu`` if it is an atomic measure (on ``space`` when given)."""
    if not isinstance(mu, AtomicMeasure):
        raise InvalidArgumentError(f"expected an AtomicMeasure, got {type(mu).__name__}")
    if space is not None and mu.space != space:
        raise InvalidArgumentError("measure lives on a different space")
    return mu


def check_measures(measures, space=None) -> list:
    if isinstance(measures, AtomicMeasure):
        measures = [measures]
    out = [check_measure(m, space) for m in measures]
    if not out:
        raise InvalidArgumentError("expected at least one measure")
    return out


def check_path(path, space=None) -> MeasurePath:
    if not isinstance(path, MeasurePath):
        raise InvalidArgumentError(f"expected a MeasurePath, got {type(path).__name__}")
    if space is not None and path.space != space:
        raise InvalidArgumentError("path lives on a different space")
    return path


def check_is_fitted(estimator, attributes=None):
    """sklearn's check, re-raised as :class:`NotFittedError` with a short message."""
    try:
        _sk_check_is_fitted(estimator, attributes)
    except NotFittedError as exc:
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet; call fit first") from exc
