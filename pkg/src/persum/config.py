"""Engine configuration: every tunable with its default, validated on load."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import MalformedInput

ENV_CONFIG = "PERSUM_CONFIG"
ENV_DATA_DIR = "PERSUM_DATA_DIR"


@dataclass
class EngineConfig:
    # clustering / weighting model
    beta_sigmoid: float = 5.0
    alpha_lr: float = 1e-3
    gamma_lr: float = 1e-3
    lambda_coh: float = 0.5
    phi_red: float = 0.5
    max_iter: int = 60
    tol: float = 1e-6
    # preference and reward learning rates
    gamma1: float = 0.001
    gamma2: float = 0.005
    # ground-truth reward coefficients
    reward_rouge1: float = 0.8
    reward_rouge2: float = 0.5
    reward_redundancy: float = 0.25
    # selection
    budget_words: int = 100
    pool_size: int = 10
    unit: str = "unigram"
    # interactive budgets
    concept_queries: int = 10
    summary_queries: int = 5
    group_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.beta_sigmoid <= 0:
            raise MalformedInput("beta_sigmoid must be positive")
        for name in ("alpha_lr", "gamma_lr", "gamma1", "gamma2"):
            if getattr(self, name) <= 0:
                raise MalformedInput(f"{name} must be positive")
        for name in ("lambda_coh", "phi_red"):
            if getattr(self, name) < 0:
                raise MalformedInput(f"{name} must be non-negative")
        if self.budget_words < 1 or self.pool_size < 1:
            raise MalformedInput("budget_words and pool_size must be positive")
        if self.unit not in ("unigram", "bigram", "phrase"):
            raise MalformedInput(f"unknown concept unit '{self.unit}'")

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise MalformedInput(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInput(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise MalformedInput(f"config {path} must hold a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_env(cls) -> "EngineConfig":
        path = os.environ.get(ENV_CONFIG)
        return cls.from_file(path) if path else cls()

    def exdos_hyper(self):
        from .exdos import ExDosHyper
        return ExDosHyper(
            alpha_lr=self.alpha_lr,
            gamma_lr=self.gamma_lr,
            beta_sigmoid=self.beta_sigmoid,
            lambda_coh=self.lambda_coh,
            phi_red=self.phi_red,
            max_iter=self.max_iter,
            tol=self.tol,
        )

    def reward_coeffs(self):
        from .evaluation import RewardCoeffs
        return RewardCoeffs(
            rouge1=self.reward_rouge1,
            rouge2=self.reward_rouge2,
            redundancy=self.reward_redundancy,
        )


def data_dir() -> Path:
    return Path(os.environ.get(ENV_DATA_DIR, "./persum-data"))
