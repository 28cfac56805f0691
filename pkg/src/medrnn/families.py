"""Uniform fit / predict / serialise interface over every model family."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (DEFAULT_LAMBDA, RidgeModel, from_joint, last_observed,
                        regular_rnn_configs, ridge_fit, ridge_predict, to_joint)
from .checkpoint import TYPE_TAGS, CheckpointError
from .data import Dataset
from .model import ModelConfig, ParameterStore, forward
from .train import TrainConfig, TrainReport, train

FAMILIES = tuple(TYPE_TAGS)
RNN_FAMILIES = ("attention", "rnn-joint", "rnn-per-station")


@dataclass
class FittedModel:
    family: str
    base: ModelConfig
    configs: list[ModelConfig] = field(default_factory=list)
    params: list[ParameterStore] = field(default_factory=list)
    ridge: RidgeModel | None = None
    reports: list[TrainReport] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        """Free-running forecasts ``[N, D, T_dec, F]`` for inputs ``[N, E, T_enc, F]``."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 3
        if single:
            X = X[None]
        fam = self.family
        if fam == "attention":
            Y = forward(X, self.params[0], self.configs[0]).y_hat
        elif fam == "rnn-joint":
            Y = from_joint(forward(to_joint(X), self.params[0], self.configs[0]).y_hat, self.base.D)
        elif fam == "rnn-per-station":
            Y = np.concatenate([forward(X[:, j:j + 1], p, c).y_hat
                                for j, (c, p) in enumerate(zip(self.configs, self.params))], axis=1)
        elif fam in ("linreg-joint", "linreg-per-station"):
            Y = ridge_predict(self.ridge, X)
        else:
            Y = last_observed(X, self.base.T_dec)
        return Y[0] if single else Y

    def attention_weights(self, X) -> np.ndarray:
        """Attention weights ``[N, D, E]``; only for the attention family."""
        if self.family != "attention":
            raise ValueError(f"family {self.family!r} has no attention weights")
        return forward(np.asarray(X, dtype=np.float64), self.params[0], self.configs[0]).trace.w

    # ------------------------------------------------------ serialisation

    def to_container(self):
        header = {"type": self.family, "type_tag": TYPE_TAGS[self.family],
                  "base_config": self.base.to_dict(),
                  "configs": [c.to_dict() for c in self.configs]}
        arrays = []
        if self.family in ("attention", "rnn-joint"):
            arrays += list(self.params[0].items())
            header["config"] = self.configs[0].to_dict()
        elif self.family == "rnn-per-station":
            for j, p in enumerate(self.params):
                arrays += [(f"station{j}/{k}", v) for k, v in p.items()]
        elif self.ridge is not None:
            header["ridge"] = {"joint": self.ridge.joint, "lam": self.ridge.lam}
            arrays += [(f"ridge.{g}", W) for g, W in enumerate(self.ridge.W)]
        return header, arrays

    @classmethod
    def from_container(cls, header: dict, arrays: dict) -> "FittedModel":
        fam = header.get("type")
        if fam not in TYPE_TAGS or TYPE_TAGS[fam] != header.get("type_tag"):
            raise CheckpointError(f"unknown model type {fam!r}")
        base = ModelConfig.from_dict(header["base_config"])
        configs = [ModelConfig.from_dict(c) for c in header["configs"]]
        m = cls(fam, base, configs)
        if fam in ("attention", "rnn-joint"):
            m.params = [ParameterStore({k: v for k, v in arrays.items() if "/" not in k
                                        and not k.startswith(("norm.", "ridge."))})]
        elif fam == "rnn-per-station":
            for j in range(len(configs)):
                pre = f"station{j}/"
                m.params.append(ParameterStore({k[len(pre):]: v for k, v in arrays.items()
                                                if k.startswith(pre)}))
        elif fam.startswith("linreg"):
            r = header["ridge"]
            W = [arrays[f"ridge.{g}"] for g in range(1 if r["joint"] else base.D)]
            m.ridge = RidgeModel(W, r["joint"], r["lam"], base.T_dec, base.F_dec)
        return m


def fit_family(family: str, train_data: Dataset, valid_data: Dataset, base: ModelConfig,
               tcfg: TrainConfig, lam: float = DEFAULT_LAMBDA) -> FittedModel:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    m = FittedModel(family, base)
    if family == "attention":
        p, r = train(train_data, valid_data, base, tcfg)
        m.configs, m.params, m.reports = [base], [p], [r]
    elif family == "rnn-joint":
        _, cfg = regular_rnn_configs(base)
        tj = replace(train_data, X=to_joint(train_data.X), Y=to_joint(train_data.Y))
        vj = replace(valid_data, X=to_joint(valid_data.X), Y=to_joint(valid_data.Y))
        p, r = train(tj, vj, cfg, tcfg)
        m.configs, m.params, m.reports = [cfg], [p], [r]
    elif family == "rnn-per-station":
        per, _ = regular_rnn_configs(base)
        for j, cfg in enumerate(per):
            tj = replace(train_data, X=train_data.X[:, j:j + 1], Y=train_data.Y[:, j:j + 1])
            vj = replace(valid_data, X=valid_data.X[:, j:j + 1], Y=valid_data.Y[:, j:j + 1])
            p, r = train(tj, vj, cfg, tcfg)
            m.configs.append(cfg)
            m.params.append(p)
            m.reports.append(r)
    elif family in ("linreg-joint", "linreg-per-station"):
        m.ridge = ridge_fit(train_data, joint=family == "linreg-joint", lam=lam)
    return m


def mse_percent(y_hat, y) -> float:
    """100 x mean squared error, as a mean of per-sample means."""
    r = (np.asarray(y_hat) - np.asarray(y)) ** 2
    if r.ndim == 4:
        return 100.0 * float(np.mean(r.reshape(r.shape[0], -1).mean(axis=1)))
    return 100.0 * float(r.mean())
