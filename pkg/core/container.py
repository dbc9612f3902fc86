#!/usr/bin/env python3
"""
Application container and wiring for the CLI.
Builds Config, sets up logging and the precinct worker pool, and derives the
fitting configurations the commands hand to the services.
"""

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Optional

from config import Config
from core.logging_utils import setup_logging
from core.parallel import set_max_workers
from services.neural_net import NeuralFitConfig
from services.optimizer import FitConfig


@dataclass
class AppContainer:
    config: Config
    fit_config: FitConfig
    neural_config: NeuralFitConfig

    def fit_config_for(self, method: str, **overrides: Any) -> FitConfig:
        values = {**self.fit_config.to_dict(), "method": method, **overrides}
        return FitConfig(**values)


def build_fit_config(cfg: Config) -> FitConfig:
    return FitConfig(
        iters_total=cfg.iters_total,
        iters_phase1=cfg.iters_phase1,
        iters_phase3=cfg.iters_phase3,
        lr=cfg.lr,
        bt_shrink=cfg.bt_shrink,
        bt_armijo=cfg.bt_armijo,
        bt_max_halvings=cfg.bt_max_halvings,
        bt_init_scale=cfg.bt_init_scale,
        bt_growth=cfg.bt_growth,
        phi2_floor=cfg.phi2_floor,
        agg_iters=cfg.agg_iters,
        seed=cfg.seed,
    )


def build_neural_config(cfg: Config) -> NeuralFitConfig:
    return NeuralFitConfig(
        hidden=cfg.nn_hidden,
        lr=cfg.nn_lr,
        restarts=cfg.nn_restarts,
        checkpoints=tuple(cfg.nn_checkpoints),
        seed=cfg.seed,
        init_scale=cfg.nn_init_scale,
        phi2_floor=cfg.phi2_floor,
    )


def init_container(config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                   use_env: bool = True) -> AppContainer:
    """Load configuration and wire the runtime."""
    cfg = Config(config_file=config_file, overrides=overrides, use_env=use_env)
    setup_logging(cfg.log_level, cfg.log_file)
    set_max_workers(cfg.threads)

    container = AppContainer(config=cfg, fit_config=build_fit_config(cfg), neural_config=build_neural_config(cfg))
    logging.getLogger(__name__).debug(f"App container initialized (threads={cfg.threads}, seed={cfg.seed})")
    return container
