"""Model backends: the contract the service runs, plus the real loader."""

from __future__ import annotations

import io
from typing import Protocol, runtime_checkable

import numpy as np

DEFAULT_MODEL_ID = "vidore/colqwen2-v1.0-hf"


@runtime_checkable
class ModelBackend(Protocol):
    """What the service needs from a model: load once, then embed."""

    model_id: str
    device: str  # "cpu" or "gpu"

    def load(self) -> None: ...

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, data: bytes) -> np.ndarray: ...


class ColQwenBackend:
    """ColQwen2 retrieval model behind the backend contract.

    The heavy imports happen inside :meth:`load`, so constructing the
    service stays cheap and environments without the model extra can still
    import this module. Weights come from the model hub at deploy time;
    they are never bundled.
    """

    def __init__(self, model_id: str = DEFAULT_MODEL_ID, device: str = "cpu"):
        if device not in ("cpu", "gpu"):
            raise ValueError(f"device must be 'cpu' or 'gpu', got {device!r}")
        self.model_id = model_id
        self.device = device
        self._model = None
        self._processor = None
        self._torch = None

    def load(self) -> None:
        try:
            import torch
            from transformers import ColQwen2ForRetrieval, ColQwen2Processor
        except ImportError as exc:
            raise RuntimeError(
                f"the real model path needs the 'model' extra (torch, transformers): {exc}"
            ) from exc
        torch_device = "cuda" if self.device == "gpu" else "cpu"
        dtype = torch.bfloat16 if self.device == "gpu" else torch.float32
        model = ColQwen2ForRetrieval.from_pretrained(self.model_id, dtype=dtype)
        self._model = model.to(torch_device).eval()
        self._processor = ColQwen2Processor.from_pretrained(self.model_id)
        self._torch = torch

    def _forward(self, batch) -> np.ndarray:
        batch = batch.to(self._model.device)
        with self._torch.no_grad():
            out = self._model(**batch)
        return out.embeddings[0].to(self._torch.float32).cpu().numpy()

    def embed_text(self, text: str) -> np.ndarray:
        return self._forward(self._processor(text=[text], return_tensors="pt"))

    def embed_image(self, data: bytes) -> np.ndarray:
        from PIL import Image

        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
        return self._forward(self._processor(images=[rgb], return_tensors="pt"))
