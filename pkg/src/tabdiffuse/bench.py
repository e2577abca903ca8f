"""Evaluation protocol: mask grids, ensemble inference, downstream fits, ranks.

Protocol per (method, mask setting): draw ``n_mask_seeds`` masks; for each
mask average ``n_inferences`` independently seeded imputations and score
that average; report the mean of the per-mask scores.  Deterministic
imputers are unaffected by the averaging, stochastic ones are smoothed by
it.  Ranks are computed within each setting (1 = best, ties averaged) and
aggregated as mean/std per method across settings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import accuracy as accuracy_score
from .metrics import mse_missing, pearson_missing, rmse
from .optim import AdamW, ParamStore
from .rng import Rng, derive_seed
from .tensor import Tensor, log, softmax
from . import data as data_mod


@dataclass(frozen=True)
class MaskSpec:
    """One missingness setting of the evaluation grid."""

    mechanism: str  # "mcar" | "mar"
    p_random: float | None = None
    p_col: int | None = None

    def __post_init__(self):
        if self.mechanism == "mcar":
            if self.p_random is None or self.p_col is not None:
                raise ValueError("mcar takes p_random only")
        elif self.mechanism == "mar":
            if self.p_col is None or self.p_random is not None:
                raise ValueError("mar takes p_col only")
        else:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")

    @property
    def label(self) -> str:
        if self.mechanism == "mcar":
            return f"mcar-{self.p_random:g}"
        return f"mar-{self.p_col}"

    def generate(self, n_rows: int, n_cols: int, seed: int) -> np.ndarray:
        if self.mechanism == "mcar":
            return data_mod.gen_mcar_mask(n_rows, n_cols, self.p_random, seed)
        return data_mod.gen_mar_mask(n_rows, n_cols, self.p_col, seed)


@dataclass(frozen=True)
class EvalRow:
    method: str
    setting: str
    mask_seed: int
    mse: float
    pearson: float | None  # None when undefined (zero-variance imputation)


def ensemble_eval(
    impute_fn,
    method: str,
    x_true: np.ndarray,
    spec: MaskSpec,
    n_mask_seeds: int = 5,
    n_inferences: int = 5,
    base_seed: int = 0,
    imputation_sink: dict | None = None,
    score_transform=None,
) -> list[EvalRow]:
    """Score one imputer on one mask setting.

    ``impute_fn(x_obs, mask, seed)`` must return a single imputation; the
    harness averages ``n_inferences`` of them per mask before scoring, so
    the averaging order (average first, then score) is owned here.  When
    ``imputation_sink`` is given, the first mask seed's averaged imputation
    is stored under (method, spec.label) for downstream evaluation.
    ``score_transform`` maps truth and imputation into the reporting space
    (e.g. a scaler's inverse) before the metrics are computed.
    """
    x_true = np.asarray(x_true, dtype=np.float64)
    n_rows, n_cols = x_true.shape
    truth_scored = score_transform(x_true) if score_transform is not None else x_true
    rows: list[EvalRow] = []
    for s in range(n_mask_seeds):
        mask_seed = derive_seed(base_seed, s)
        mask = spec.generate(n_rows, n_cols, mask_seed)
        x_obs = np.where(mask, x_true, 0.0)
        acc = np.zeros_like(x_true)
        for i in range(n_inferences):
            acc += impute_fn(x_obs, mask, derive_seed(mask_seed, i))
        avg = acc / n_inferences
        if imputation_sink is not None and s == 0:
            imputation_sink[(method, spec.label)] = avg
        avg_scored = score_transform(avg) if score_transform is not None else avg
        try:
            pearson = pearson_missing(truth_scored, avg_scored, mask)
        except ValueError:
            pearson = None  # constant fills have no defined correlation
        rows.append(
            EvalRow(
                method=method,
                setting=spec.label,
                mask_seed=s,
                mse=mse_missing(truth_scored, avg_scored, mask),
                pearson=pearson,
            )
        )
    return rows


def summarize(rows: list[EvalRow]) -> dict[str, dict[str, float]]:
    """setting -> method -> mean MSE over mask seeds."""
    acc: dict[tuple[str, str], list[float]] = {}
    for r in rows:
        acc.setdefault((r.setting, r.method), []).append(r.mse)
    out: dict[str, dict[str, float]] = {}
    for (setting, method), values in acc.items():
        out.setdefault(setting, {})[method] = float(np.mean(values))
    return out


# -- ranking ------------------------------------------------------------------


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks with 1 = smallest; exact ties share the average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    sv = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_table(summary: dict[str, dict[str, float]]) -> list[tuple[str, float, float]]:
    """Aggregate (method, mean rank, std rank) across settings; lower = better.

    Every setting must score the same method set.  Output order follows the
    method order of the first setting, so the table is invariant to how the
    input dict happens to be arranged.
    """
    settings = list(summary)
    if not settings:
        raise ValueError("empty summary")
    methods = sorted(summary[settings[0]])
    per_method: dict[str, list[float]] = {m: [] for m in methods}
    for setting in settings:
        if sorted(summary[setting]) != methods:
            raise ValueError(f"setting {setting!r} scores a different method set")
        vals = np.array([summary[setting][m] for m in methods])
        ranks = average_ranks(vals)
        for m, r in zip(methods, ranks):
            per_method[m].append(float(r))
    return [
        (m, float(np.mean(per_method[m])), float(np.std(per_method[m])))
        for m in methods
    ]


# -- downstream task -----------------------------------------------------------


def downstream_eval(
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    test_y: np.ndarray,
    task: str,
    seed: int = 0,
    steps: int = 300,
    lr: float = 0.05,
    weight_decay: float = 1e-4,
) -> float:
    """Fixed linear yardstick on imputed data: RMSE (regression) or accuracy.

    Ridge-style linear regression or multinomial logistic regression,
    full-batch AdamW with fixed hyper-parameters; not tuned per dataset.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    test_y = np.asarray(test_y, dtype=np.float64)
    k = train_X.shape[1]
    rng = Rng(seed)

    if task == "regression":
        out_dim = 1
        y_fit = train_y[:, None]
    elif task in ("binclass", "multiclass"):
        classes = np.unique(train_y)
        if len(classes) < 2:
            raise ValueError("classification needs at least 2 classes in the training labels")
        lookup = {c: i for i, c in enumerate(classes)}
        idx = np.array([lookup[v] for v in train_y])
        onehot = np.zeros((len(train_y), len(classes)))
        onehot[np.arange(len(train_y)), idx] = 1.0
        out_dim = len(classes)
    else:
        raise ValueError(f"unknown task {task!r}")

    W = Tensor((2.0 * rng.uniform((k, out_dim)) - 1.0) * 0.01, requires_grad=True)
    b = Tensor(np.zeros(out_dim), requires_grad=True)
    store = ParamStore()
    store.register("W", W)
    store.register("b", b)
    opt = AdamW(store, lr=lr, weight_decay=weight_decay)
    Xt = Tensor(train_X)
    for _ in range(steps):
        logits = Xt @ W + b
        if task == "regression":
            d = logits - y_fit
            loss = (d * d).mean()
        else:
            p = softmax(logits, axis=-1)
            loss = -(Tensor(onehot) * log(p + 1e-12)).sum(axis=-1).mean()
        loss.backward()
        opt.step()

    test_logits = test_X @ W.data + b.data
    if task == "regression":
        return rmse(test_y, test_logits[:, 0])
    pred = classes[np.argmax(test_logits, axis=-1)]
    return accuracy_score(test_y, pred)
