"""Checkpoint archive: a zip with config.json, meta.json and one .npy per named tensor."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np
import torch

from .model import HANet, HANetConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: HANetConfig
    state: dict
    epoch: int = 0
    val_f1: float | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: HANet, epoch=0, val_f1=None, extra=None) -> "Checkpoint":
        state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
        return cls(model.config, state, epoch, val_f1, dict(extra or {}))

    def build_model(self) -> HANet:
        model = HANet(self.config)
        model.load_state_dict(self.state)
        model.eval()
        return model

    def save(self, path) -> None:
        header = []
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("config.json", self.config.to_json())
            for name, t in self.state.items():
                arr = t.numpy()
                buf = io.BytesIO()
                np.save(buf, arr, allow_pickle=False)
                zf.writestr(f"tensors/{name}.npy", buf.getvalue())
                header.append({"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)})
            meta = {"format": FORMAT_VERSION, "epoch": self.epoch, "val_f1": self.val_f1,
                    "extra": self.extra, "tensors": header}
            zf.writestr("meta.json", json.dumps(meta, indent=2))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with zipfile.ZipFile(path) as zf:
            config = HANetConfig.from_dict(json.loads(zf.read("config.json")))
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint format {meta.get('format')}")
            state = {}
            for entry in meta["tensors"]:
                arr = np.load(io.BytesIO(zf.read(f"tensors/{entry['name']}.npy")), allow_pickle=False)
                if list(arr.shape) != entry["shape"] or str(arr.dtype) != entry["dtype"]:
                    raise ValueError(f"tensor {entry['name']} does not match its header")
                state[entry["name"]] = torch.from_numpy(arr.copy())
        expected = set(HANet(config).state_dict())
        if set(state) != expected:
            missing = sorted(expected - set(state))[:3]
            raise ValueError(f"checkpoint does not match its config (e.g. missing {missing})")
        return cls(config, state, meta["epoch"], meta["val_f1"], meta.get("extra", {}))
