"""Gaussian-kernel SVM trained by SMO, one-vs-one multiclass and confusion matrices"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .bitmeasures import FEATURE_COUNT, FeatureVector, Scaler, fit_scaler
from .errors import ConfigurationError, ModelFormatError, TrainingError, UnknownLabelError

logger = structlog.get_logger(__name__)

MODEL_FORMAT = "stegwave-svm 1"
_TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    """Hyperparameters of the RBF soft-margin SVM"""
    gamma: float = 1.0 / FEATURE_COUNT
    C: float = 10.0
    tol: float = 1e-3
    max_passes: int = 200
    seed: int = 1

    def __post_init__(self):
        if not (self.gamma > 0 and self.C > 0 and self.tol > 0):
            raise ConfigurationError("gamma, C and tol must all be positive")
        if self.max_passes < 1:
            raise ConfigurationError("max_passes must be >= 1")

    @classmethod
    def from_settings(cls, svm_settings=None, **overrides) -> "SvmConfig":
        if svm_settings is None:
            from ..config import settings
            svm_settings = settings.svm
        values = dict(
            gamma=svm_settings.gamma,
            C=svm_settings.c,
            tol=svm_settings.tol,
            max_passes=svm_settings.max_passes,
            seed=svm_settings.seed,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class Sample:
    """One labelled feature vector"""
    features: FeatureVector
    label: int


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Binary decision function f(x) = sum(alpha_y * K(sv, x)) + b"""
    support_vectors: np.ndarray
    alpha_y: np.ndarray
    b: float
    gamma: float

    def decision(self, x: np.ndarray) -> np.ndarray:
        """f for a (9,) vector or each row of an (n, 9) matrix"""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        points = x[None, :] if single else x
        if self.support_vectors.shape[0] == 0:
            scores = np.full(points.shape[0], self.b)
        else:
            kernel = rbf_matrix(points, self.support_vectors, self.gamma)
            scores = kernel @ self.alpha_y + self.b
        return scores[0] if single else scores


@dataclass
class SmoSolution:
    """Raw dual solution for the training set, kept for KKT inspection"""
    alphas: np.ndarray
    b: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    """One-vs-one ensemble with the scaler used at training time"""
    labels: Tuple[int, ...]
    pair_models: Dict[Tuple[int, int], SvmModel]
    scaler: Scaler

    def __post_init__(self):
        n = len(self.labels)
        if len(self.pair_models) != n * (n - 1) // 2:
            raise ConfigurationError(f"{n} classes need {n * (n - 1) // 2} pair models")

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as handle:
            handle.write(dumps_model(self))

    @classmethod
    def load(cls, path) -> "MulticlassModel":
        with open(path, "r", encoding="ascii") as handle:
            return loads_model(handle.read())


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Row-normalized true-vs-predicted frequencies"""
    labels: Tuple[int, ...]
    counts: np.ndarray
    matrix: np.ndarray = field(init=False)
    accuracy: float = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        totals = counts.sum(axis=1, keepdims=True)
        matrix = np.divide(counts, totals, out=np.zeros(counts.shape), where=totals > 0)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "matrix", matrix)
        total = counts.sum()
        object.__setattr__(self, "accuracy", float(np.trace(counts) / total) if total else 0.0)

    def recall(self) -> Dict[int, float]:
        return {label: float(self.matrix[i, i]) for i, label in enumerate(self.labels)}


def rbf_kernel(x: FeatureVector, y: FeatureVector, gamma: float) -> float:
    a = x.mu if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    b = y.mu if isinstance(y, FeatureVector) else np.asarray(y, dtype=np.float64)
    diff = a - b
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """K[i, j] = exp(-gamma * ||a_i - b_j||^2)"""
    sq = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SmoSolver:
    """SMO for the soft-margin dual with maximal-violating-pair selection.

    Working pairs follow the second-order rule; ties are resolved in a seeded
    random index order. Stops once max(-yG, up) - min(-yG, low) < tol, which
    leaves every training point within tol of its KKT condition.
    """

    def __init__(self, config: SvmConfig):
        self.config = config
        self.logger = structlog.get_logger(f"{__name__}.SmoSolver")

    def solve(self, features: np.ndarray, labels: np.ndarray) -> SmoSolution:
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise TrainingError("training features must be finite")
        if set(np.unique(y).tolist()) != {-1.0, 1.0}:
            raise TrainingError("binary training needs at least one sample of each label -1 and +1")

        n = x.shape[0]
        C = self.config.C
        eps = self.config.tol
        kernel = rbf_matrix(x, x, self.config.gamma)
        q = (y[:, None] * y[None, :]) * kernel
        order = np.random.default_rng(self.config.seed).permutation(n)

        alphas = np.zeros(n)
        grad = -np.ones(n)
        max_iter = self.config.max_passes * max(n, 10)
        iterations = 0
        converged = False

        while iterations < max_iter:
            upper = alphas >= C
            lower = alphas <= 0
            up = ((y > 0) & ~upper) | ((y < 0) & ~lower)
            low = ((y > 0) & ~lower) | ((y < 0) & ~upper)
            v = -y * grad
            if not np.any(up) or not np.any(low):
                converged = True
                break

            v_up = np.where(up, v, -np.inf)[order]
            i = int(order[np.argmax(v_up)])
            g_max = v[i]
            g_min = np.min(np.where(low, v, np.inf))
            if g_max - g_min < eps:
                converged = True
                break

            grad_diff = g_max - v
            quad = np.maximum(2.0 - 2.0 * kernel[i], _TAU)
            candidates = low & (grad_diff > 0)
            if not np.any(candidates):
                converged = True
                break
            obj = np.where(candidates, -(grad_diff ** 2) / quad, np.inf)[order]
            j = int(order[np.argmin(obj)])

            old_i, old_j = alphas[i], alphas[j]
            self._update_pair(alphas, grad, q, y, i, j, C)
            delta_i = alphas[i] - old_i
            delta_j = alphas[j] - old_j
            grad += q[:, i] * delta_i + q[:, j] * delta_j
            iterations += 1

        if not converged:
            self.logger.warning("smo_iteration_cap", iterations=iterations, samples=n)

        b = -self._rho(alphas, grad, y, C)
        self.logger.debug("smo_finished", iterations=iterations, converged=converged,
                          support_vectors=int(np.count_nonzero(alphas > 0)))
        return SmoSolution(alphas=alphas, b=b, iterations=iterations, converged=converged)

    @staticmethod
    def _update_pair(alphas, grad, q, y, i, j, C):
        if y[i] != y[j]:
            quad = max(q[i, i] + q[j, j] + 2.0 * q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alphas[i] - alphas[j]
            alphas[i] += delta
            alphas[j] += delta
            if diff > 0:
                if alphas[j] < 0:
                    alphas[j] = 0.0
                    alphas[i] = diff
            elif alphas[i] < 0:
                alphas[i] = 0.0
                alphas[j] = -diff
            if diff > 0:
                if alphas[i] > C:
                    alphas[i] = C
                    alphas[j] = C - diff
            elif alphas[j] > C:
                alphas[j] = C
                alphas[i] = C + diff
        else:
            quad = max(q[i, i] + q[j, j] - 2.0 * q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alphas[i] + alphas[j]
            alphas[i] -= delta
            alphas[j] += delta
            if total > C:
                if alphas[i] > C:
                    alphas[i] = C
                    alphas[j] = total - C
            elif alphas[j] < 0:
                alphas[j] = 0.0
                alphas[i] = total
            if total > C:
                if alphas[j] > C:
                    alphas[j] = C
                    alphas[i] = total - C
            elif alphas[i] < 0:
                alphas[i] = 0.0
                alphas[j] = total

    @staticmethod
    def _rho(alphas, grad, y, C) -> float:
        y_grad = y * grad
        upper_bound, lower_bound = np.inf, -np.inf
        at_upper = alphas >= C
        at_lower = alphas <= 0
        free = ~at_upper & ~at_lower
        if np.any(free):
            return float(y_grad[free].mean())
        caps = (at_upper & (y < 0)) | (at_lower & (y > 0))
        floors = (at_upper & (y > 0)) | (at_lower & (y < 0))
        if np.any(caps):
            upper_bound = y_grad[caps].min()
        if np.any(floors):
            lower_bound = y_grad[floors].max()
        return float((upper_bound + lower_bound) / 2.0)


def _stack(samples: Sequence[Sample]) -> Tuple[np.ndarray, np.ndarray]:
    features = np.stack([s.features.mu if isinstance(s.features, FeatureVector) else
                         np.asarray(s.features, dtype=np.float64) for s in samples])
    labels = np.array([s.label for s in samples])
    return features, labels


def model_from_solution(features: np.ndarray, labels: np.ndarray, solution: SmoSolution,
                        gamma: float) -> SvmModel:
    keep = solution.alphas > 0
    return SvmModel(
        support_vectors=features[keep].copy(),
        alpha_y=(solution.alphas * labels)[keep],
        b=solution.b,
        gamma=gamma,
    )


def train_binary(samples: Sequence[Sample], config: Optional[SvmConfig] = None) -> SvmModel:
    """Fit a binary model on samples labelled -1 / +1"""
    config = config or SvmConfig()
    if not samples:
        raise TrainingError("no training samples")
    features, labels = _stack(samples)
    labels = labels.astype(np.float64)
    solution = SmoSolver(config).solve(features, labels)
    return model_from_solution(features, labels, solution, config.gamma)


def predict_score(model: SvmModel, x: FeatureVector) -> float:
    vector = x.mu if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    return float(model.decision(vector))


def train_multiclass(dataset: Sequence[Sample], config: Optional[SvmConfig] = None,
                     workers: int = 1) -> MulticlassModel:
    """Fit the scaler on all samples, then one binary model per label pair.

    For pair (a, b) with a < b, class a is +1. Pair models only read shared
    arrays, so they can be trained on a thread pool without changing results.
    """
    config = config or SvmConfig()
    labels = sorted({int(s.label) for s in dataset})
    if len(labels) < 2:
        raise TrainingError(f"multiclass training needs at least 2 classes, got {len(labels)}")

    scaler = fit_scaler([s.features for s in dataset])
    raw, targets = _stack(dataset)
    scaled = scaler.transform(raw)
    pairs = list(combinations(labels, 2))

    def fit_pair(pair):
        a, b = pair
        mask = (targets == a) | (targets == b)
        y = np.where(targets[mask] == a, 1.0, -1.0)
        solution = SmoSolver(config).solve(scaled[mask], y)
        return model_from_solution(scaled[mask], y, solution, config.gamma)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fitted = list(pool.map(fit_pair, pairs))
    else:
        fitted = [fit_pair(pair) for pair in pairs]

    logger.info("multiclass_trained", classes=len(labels), pair_models=len(pairs), samples=len(dataset))
    return MulticlassModel(labels=tuple(labels), pair_models=dict(zip(pairs, fitted)), scaler=scaler)


def _votes(model: MulticlassModel, scaled: np.ndarray) -> np.ndarray:
    index = {label: i for i, label in enumerate(model.labels)}
    votes = np.zeros((scaled.shape[0], len(model.labels)), dtype=np.int64)
    rows = np.arange(scaled.shape[0])
    for (a, b), pair_model in model.pair_models.items():
        scores = np.atleast_1d(pair_model.decision(scaled))
        winners = np.where(scores > 0, index[a], index[b])
        np.add.at(votes, (rows, winners), 1)
    return votes


def predict_classes(model: MulticlassModel, features: np.ndarray) -> List[int]:
    """Majority vote for each raw (unscaled) row; ties go to the smallest label"""
    scaled = model.scaler.transform(np.atleast_2d(features))
    votes = _votes(model, scaled)
    # labels are sorted, so argmax's first-hit rule is the smallest-label tie break
    return [model.labels[i] for i in np.argmax(votes, axis=1)]


def predict_class(model: MulticlassModel, x: FeatureVector) -> int:
    vector = x.mu if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    return predict_classes(model, vector[None, :])[0]


def evaluate(model: MulticlassModel, test: Sequence[Sample]) -> ConfusionMatrix:
    if not test:
        raise TrainingError("evaluation needs at least one test sample")
    index = {label: i for i, label in enumerate(model.labels)}
    unknown = sorted({s.label for s in test} - set(index))
    if unknown:
        raise UnknownLabelError(f"test labels {unknown} were not seen at training time")
    features, truth = _stack(test)
    predicted = predict_classes(model, features)
    counts = np.zeros((len(model.labels), len(model.labels)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        counts[index[int(t)], index[p]] += 1
    matrix = ConfusionMatrix(labels=model.labels, counts=counts)
    logger.info("evaluated", samples=len(test), accuracy=matrix.accuracy)
    return matrix


# -- persistence -----------------------------------------------------------

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def dumps_model(model: MulticlassModel) -> str:
    lines = [MODEL_FORMAT, "labels " + " ".join(str(label) for label in model.labels)]
    lines.append("means " + " ".join(_fmt(v) for v in model.scaler.means))
    lines.append("stddevs " + " ".join(_fmt(v) for v in model.scaler.stddevs))
    for (a, b), pair_model in model.pair_models.items():
        n_sv = pair_model.support_vectors.shape[0]
        lines.append(f"pair {a} {b} {_fmt(pair_model.gamma)} {_fmt(pair_model.b)} {n_sv}")
        for coef, vector in zip(pair_model.alpha_y, pair_model.support_vectors):
            lines.append(" ".join([_fmt(coef)] + [_fmt(v) for v in vector]))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> MulticlassModel:
    lines = [line for line in text.split("\n") if line.strip()]
    try:
        if not lines or lines[0].strip() != MODEL_FORMAT:
            raise ModelFormatError(f"unknown model format header: {lines[0] if lines else '<empty>'}")
        labels = _keyed(lines[1], "labels", int)
        means = _keyed(lines[2], "means", float)
        stddevs = _keyed(lines[3], "stddevs", float)
        if labels != sorted(set(labels)):
            raise ModelFormatError(f"labels must be distinct and ascending, got {labels}")
        expected = set(combinations(labels, 2))
        pair_models = {}
        cursor = 4
        while cursor < len(lines):
            head = lines[cursor].split()
            if head[0] != "pair" or len(head) != 6:
                raise ModelFormatError(f"expected a pair line, got: {lines[cursor]}")
            a, b, gamma, bias, n_sv = int(head[1]), int(head[2]), float(head[3]), float(head[4]), int(head[5])
            if (a, b) not in expected or (a, b) in pair_models:
                raise ModelFormatError(f"pair {a} {b} does not match labels {labels}")
            rows = [[float(v) for v in line.split()] for line in lines[cursor + 1:cursor + 1 + n_sv]]
            if len(rows) != n_sv or any(len(row) != FEATURE_COUNT + 1 for row in rows):
                raise ModelFormatError(f"pair {a} {b}: malformed support vector block")
            block = np.array(rows, dtype=np.float64).reshape(n_sv, FEATURE_COUNT + 1)
            pair_models[(a, b)] = SvmModel(support_vectors=block[:, 1:], alpha_y=block[:, 0],
                                           b=bias, gamma=gamma)
            cursor += 1 + n_sv
        if set(pair_models) != expected:
            raise ModelFormatError(f"missing pair models for labels {labels}")
        return MulticlassModel(labels=tuple(labels), pair_models=pair_models,
                               scaler=Scaler(means=means, stddevs=stddevs))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {exc}") from exc


def _keyed(line: str, key: str, cast) -> List:
    parts = line.split()
    if not parts or parts[0] != key:
        raise ModelFormatError(f"expected '{key}' line, got: {line}")
    return [cast(v) for v in parts[1:]]
