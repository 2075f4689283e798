"""Post-hoc confidence calibrators: temperature scaling (three fits) and KDE.

Estimators follow the sklearn convention: constructor arguments are plain
parameters, ``fit`` sets trailing-underscore state, and ``get_params`` /
``set_params`` come from :class:`sklearn.base.BaseEstimator`, so the
calibrators compose with pipelines and model-selection tooling.

All fits are deterministic: objectives are summed in record order and the
search is a fixed golden-section pass over log-temperature.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import expit, logsumexp
from sklearn.base import BaseEstimator

from .errors import (
    AlignmentMismatch,
    EmptyDataset,
    McqcalError,
    NonPositiveTemperature,
    NotFitted,
    UnlabeledRecord,
)
from .metrics import confidence_and_prediction
from .numerics import KL_CLAMP, minimize_scalar, softmax_with_temperature
from .records import CalibrationDataset, ConfidencePolicy, with_logits

# Temperature search domain, in log space, shared by both fitted methods.
LOG_T_LO = -3.0
LOG_T_HI = 3.0
LOG_T_TOL = 1e-6

METHOD_NLL = "ts-nll"
METHOD_CONST = "ts-const"
METHOD_KL = "ts-kl"
METHOD_KDE = "kde"

DEFAULT_CONSTANT_TEMPERATURE = 2.5
DEFAULT_KDE_BANDWIDTH = 0.1


def _check_positive_temperature(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t <= 0:
        raise NonPositiveTemperature(f"temperature must be finite and > 0, got {t!r}")
    return t


class TemperatureScaler(BaseEstimator):
    """Single-parameter temperature scaling of restricted choice logits.

    method:
        ``"ts-nll"``   fit by minimizing the negative log-likelihood of the
                       ground-truth letters (needs labels);
        ``"ts-const"`` use the fixed ``temperature`` parameter (no fit data);
        ``"ts-kl"``    fit by minimizing the KL divergence from reference
                       answer distributions to the scaled distributions
                       (label-free, needs a reference model's distributions).
    """

    def __init__(self, method: str = METHOD_NLL, temperature: float = DEFAULT_CONSTANT_TEMPERATURE):
        self.method = method
        self.temperature = temperature

    def fit(
        self,
        dataset: CalibrationDataset | None = None,
        reference: Sequence[Sequence[float]] | None = None,
        reference_item_ids: Sequence[str] | None = None,
    ) -> "TemperatureScaler":
        if self.method == METHOD_CONST:
            self.temperature_ = _check_positive_temperature(self.temperature)
            return self
        if dataset is None or len(dataset) == 0:
            raise EmptyDataset("temperature fit needs a non-empty dataset")
        if self.method == METHOD_NLL:
            objective = _nll_objective(dataset)
        elif self.method == METHOD_KL:
            refs = _aligned_reference(dataset, reference, reference_item_ids)
            objective = _kl_objective(dataset, refs)
        else:
            raise McqcalError(f"unknown temperature method {self.method!r}")
        log_t = minimize_scalar(objective, LOG_T_LO, LOG_T_HI, LOG_T_TOL)
        self.temperature_ = math.exp(log_t)
        return self

    def transform(self, dataset: CalibrationDataset) -> CalibrationDataset:
        """Rescale every record's logits by the fitted temperature.

        The scaled logits are stored directly, so downstream metrics need no
        special casing; full-vocab-derived fields are dropped rather than
        silently mis-scaled. Per-record argmax is unchanged.
        """
        return apply_temperature(dataset, self.fitted_temperature)

    @property
    def fitted_temperature(self) -> float:
        if not hasattr(self, "temperature_"):
            raise NotFitted("call fit() first")
        return self.temperature_

    def to_json_dict(self) -> dict:
        return {"method": self.method, "temperature": self.fitted_temperature}


class KdeConfidenceCalibrator(BaseEstimator):
    """Gaussian-KDE confidence refinement from correct/incorrect densities.

    ``fit`` splits the calibration records into correctly and incorrectly
    predicted groups and stores their confidences; ``refine`` maps a raw
    confidence to the kernel-weighted share of the correct group.
    """

    def __init__(
        self,
        bandwidth: float = DEFAULT_KDE_BANDWIDTH,
        policy: ConfidencePolicy = ConfidencePolicy.RESTRICTED_SOFTMAX,
    ):
        self.bandwidth = bandwidth
        self.policy = policy

    def fit(self, dataset: CalibrationDataset) -> "KdeConfidenceCalibrator":
        if not (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0):
            raise McqcalError(f"bandwidth must be > 0, got {self.bandwidth!r}")
        if len(dataset) == 0:
            raise EmptyDataset("KDE fit needs a non-empty dataset")
        tp, fp = [], []
        for r in dataset.records:
            if r.label_index is None:
                raise UnlabeledRecord(f"record {r.item_id!r} has no label_index")
            conf, pred = confidence_and_prediction(r, self.policy)
            (tp if pred == r.label_index else fp).append(conf)
        self.tp_confidences_ = tuple(tp)
        self.fp_confidences_ = tuple(fp)
        return self

    def refine(self, p_hat):
        """Refined confidence for raw confidence(s) ``p_hat``; always in [0, 1].

        Degenerate groups resolve the 0/0 limit: no incorrect examples means
        every confidence refines to 1, no correct examples to 0.
        """
        self._check_fitted()
        p = np.asarray(p_hat, dtype=float)
        scalar = p.ndim == 0
        p = np.atleast_1d(p)
        if not self.fp_confidences_:
            out = np.ones_like(p)
        elif not self.tp_confidences_:
            out = np.zeros_like(p)
        else:
            # Ratio form of the density mixture: the shared 1/(sqrt(2*pi)*b)
            # kernel constant cancels, and log-sum-exp keeps distant points
            # from underflowing the denominator.
            out = expit(
                self._log_kernel_sum(p, self.tp_confidences_)
                - self._log_kernel_sum(p, self.fp_confidences_)
            )
        return float(out[0]) if scalar else out

    def _log_kernel_sum(self, p: np.ndarray, centers: Sequence[float]) -> np.ndarray:
        b = float(self.bandwidth)
        denom = 2.0 * b * b
        if denom == 0.0:  # b*b underflowed; the kernel ratio would be 0/0
            raise McqcalError(f"bandwidth {b!r} too small to square in float64")
        deltas = p[:, None] - np.asarray(centers)[None, :]
        return logsumexp(-(deltas**2) / denom, axis=1)

    def _check_fitted(self) -> None:
        if not hasattr(self, "tp_confidences_"):
            raise NotFitted("call fit() first")
        if not self.tp_confidences_ and not self.fp_confidences_:
            raise McqcalError("both confidence groups are empty")

    def to_json_dict(self) -> dict:
        self._check_fitted()
        return {
            "method": METHOD_KDE,
            "bandwidth": float(self.bandwidth),
            "tp": list(self.tp_confidences_),
            "fp": list(self.fp_confidences_),
        }


def _nll_objective(dataset: CalibrationDataset):
    logits, labels = [], []
    for r in dataset.records:
        if r.label_index is None:
            raise UnlabeledRecord(f"record {r.item_id!r} has no label_index")
        logits.append(np.asarray(r.choice_logits))
        labels.append(r.label_index)

    def objective(log_t: float) -> float:
        inv_t = math.exp(-log_t)
        total = 0.0
        for l, y in zip(logits, labels):
            z = l * inv_t
            total += float(logsumexp(z) - z[y])
        return total

    return objective


def _aligned_reference(
    dataset: CalibrationDataset,
    reference: Sequence[Sequence[float]] | None,
    reference_item_ids: Sequence[str] | None,
) -> list[np.ndarray]:
    if reference is None:
        raise AlignmentMismatch("KL fit needs reference distributions")
    if len(reference) != len(dataset):
        raise AlignmentMismatch(
            f"{len(reference)} reference distributions for {len(dataset)} records"
        )
    if reference_item_ids is not None:
        if len(reference_item_ids) != len(dataset):
            raise AlignmentMismatch(
                f"{len(reference_item_ids)} reference item ids for {len(dataset)} records"
            )
        for rec, rid in zip(dataset.records, reference_item_ids):
            if rec.item_id != rid:
                raise AlignmentMismatch(
                    f"reference item {rid!r} does not match record {rec.item_id!r}"
                )
    refs = []
    for rec, ref in zip(dataset.records, reference):
        arr = np.asarray(ref, dtype=float)
        if arr.shape != (rec.n_choices,):
            raise AlignmentMismatch(
                f"record {rec.item_id!r}: reference has {arr.size} entries "
                f"for {rec.n_choices} choices"
            )
        refs.append(arr)
    return refs


def _kl_objective(dataset: CalibrationDataset, refs: list[np.ndarray]):
    logits = [np.asarray(r.choice_logits) for r in dataset.records]

    def objective(log_t: float) -> float:
        inv_t = math.exp(-log_t)
        total = 0.0
        for l, p in zip(logits, refs):
            z = l * inv_t
            log_q = z - logsumexp(z)
            mask = p > 0
            total += float(
                np.sum(
                    p[mask]
                    * (np.log(p[mask]) - np.maximum(log_q[mask], math.log(KL_CLAMP)))
                )
            )
        return total

    return objective


def fit_temperature_nll(dataset: CalibrationDataset) -> TemperatureScaler:
    """Temperature minimizing the summed NLL of the ground-truth letters."""
    return TemperatureScaler(method=METHOD_NLL).fit(dataset)


def constant_temperature(t: float = DEFAULT_CONSTANT_TEMPERATURE) -> TemperatureScaler:
    """Fixed-temperature calibrator (default 2.5)."""
    return TemperatureScaler(method=METHOD_CONST, temperature=t).fit()


def fit_temperature_kl(
    dataset: CalibrationDataset,
    reference: Sequence[Sequence[float]],
    reference_item_ids: Sequence[str] | None = None,
) -> TemperatureScaler:
    """Temperature minimizing summed KL(reference || scaled distribution).

    ``reference[i]`` is the reference (pre-trained) model's restricted choice
    distribution for ``dataset.records[i]``; labels are not required.
    """
    return TemperatureScaler(method=METHOD_KL).fit(
        dataset, reference=reference, reference_item_ids=reference_item_ids
    )


def reference_distributions_for(
    dataset: CalibrationDataset, reference_ds: CalibrationDataset
) -> list[np.ndarray]:
    """Restricted softmax distributions from a reference model's records,
    aligned to ``dataset`` by (item_id, permutation_id)."""
    by_key = {(r.item_id, r.permutation_id): r for r in reference_ds.records}
    refs = []
    for rec in dataset.records:
        key = (rec.item_id, rec.permutation_id)
        ref = by_key.get(key)
        if ref is None:
            raise AlignmentMismatch(f"reference has no record for {key!r}")
        if ref.n_choices != rec.n_choices:
            raise AlignmentMismatch(
                f"record {rec.item_id!r}: {ref.n_choices} reference choices "
                f"for {rec.n_choices}"
            )
        refs.append(softmax_with_temperature(ref.choice_logits, 1.0))
    return refs


def fit_kde(
    dataset: CalibrationDataset,
    bandwidth: float = DEFAULT_KDE_BANDWIDTH,
    policy: ConfidencePolicy = ConfidencePolicy.RESTRICTED_SOFTMAX,
) -> KdeConfidenceCalibrator:
    return KdeConfidenceCalibrator(bandwidth=bandwidth, policy=policy).fit(dataset)


def kde_refine(cal: KdeConfidenceCalibrator, p_hat: float) -> float:
    return cal.refine(p_hat)


def apply_temperature(
    dataset: CalibrationDataset, cal: TemperatureScaler | float
) -> CalibrationDataset:
    """Dataset whose stored logits are divided by the calibrator's temperature."""
    t = cal if isinstance(cal, (int, float)) else cal.fitted_temperature
    t = _check_positive_temperature(t)
    return CalibrationDataset(
        records=tuple(
            with_logits(r, np.asarray(r.choice_logits) / t) for r in dataset.records
        )
    )


def calibrator_to_json_dict(cal: TemperatureScaler | KdeConfidenceCalibrator) -> dict:
    return cal.to_json_dict()


def calibrator_from_json_dict(d: dict) -> TemperatureScaler | KdeConfidenceCalibrator:
    method = d.get("method")
    if method in (METHOD_NLL, METHOD_CONST, METHOD_KL):
        cal = TemperatureScaler(method=method, temperature=d["temperature"])
        cal.temperature_ = _check_positive_temperature(d["temperature"])
        return cal
    if method == METHOD_KDE:
        cal = KdeConfidenceCalibrator(bandwidth=d["bandwidth"])
        tp, fp = tuple(d.get("tp", ())), tuple(d.get("fp", ()))
        if not tp and not fp:
            raise McqcalError("KDE calibrator needs at least one stored confidence")
        cal.tp_confidences_ = tuple(float(x) for x in tp)
        cal.fp_confidences_ = tuple(float(x) for x in fp)
        return cal
    raise McqcalError(f"unknown calibrator method {method!r}")


# Re-exported here because temperature application is this module's business.
__all__ = [
    "TemperatureScaler",
    "KdeConfidenceCalibrator",
    "softmax_with_temperature",
    "fit_temperature_nll",
    "constant_temperature",
    "fit_temperature_kl",
    "fit_kde",
    "kde_refine",
    "apply_temperature",
    "calibrator_to_json_dict",
    "calibrator_from_json_dict",
]
