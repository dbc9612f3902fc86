"""Model files: JSON with a "type" discriminator ("logit" or "neural")."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

from core.errors import ValidationError
from services.dataset import Standardization
from services.likelihood import LogitModel
from services.neural_net import NeuralModel
from utils.files import read_json, write_json

logger = logging.getLogger(__name__)

Model = Union[LogitModel, NeuralModel]


@dataclass
class ModelFile:
    model: Model
    feature_names: Tuple[str, ...]
    standardization: Optional[Standardization] = None
    method: str = ""
    config: Dict[str, Any] = field(default_factory=dict)
    trained_at: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "type": self.model.kind,
            "method": self.method,
            "feature_names": list(self.feature_names),
            "standardization": self.standardization.to_dict() if self.standardization else None,
            "config": self.config,
        }
        if isinstance(self.model, LogitModel):
            payload["beta"] = [float(v) for v in self.model.beta]
        else:
            payload.update({
                "hidden": self.model.hidden,
                "W1": self.model.W1.tolist(),
                "b1": self.model.b1.tolist(),
                "W2": self.model.W2.tolist(),
                "b2": self.model.b2,
            })
        if self.trained_at is not None:
            payload["trained_at"] = self.trained_at
        return payload


def save_model(path: str, model_file: ModelFile) -> None:
    write_json(path, model_file.to_dict())
    logger.info(f"Saved {model_file.model.kind} model to {path}")


def model_from_dict(payload: Dict[str, Any], source: Optional[str] = None) -> ModelFile:
    kind = payload.get("type")
    try:
        if kind == "logit":
            model: Model = LogitModel(payload["beta"])
        elif kind == "neural":
            model = NeuralModel(payload["W1"], payload["b1"], payload["W2"], payload["b2"])
            if int(payload.get("hidden", model.hidden)) != model.hidden:
                raise ValidationError("'hidden' disagrees with the weight shapes", source=source)
        else:
            raise ValidationError(f"unknown model type {kind!r}", source=source)
        names = tuple(payload["feature_names"])
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"malformed model file: {e}", source=source) from e

    expected = model.beta.size if isinstance(model, LogitModel) else model.p
    if len(names) != expected:
        raise ValidationError(f"{len(names)} feature names for a model with {expected} inputs", source=source)
    raw_std = payload.get("standardization")
    standardization = Standardization.from_dict(raw_std) if raw_std else None
    return ModelFile(model, names, standardization, payload.get("method", kind), payload.get("config", {}),
                     payload.get("trained_at"))


def load_model(path: str) -> ModelFile:
    return model_from_dict(read_json(path), source=path)
