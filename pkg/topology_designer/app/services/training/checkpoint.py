"""Checkpoint = JSON manifest + flat little-endian float payload in manifest order."""
import json
from pathlib import Path
from typing import Optional

import numpy as np

from topology_designer.app.core.errors import DimensionError, InputError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import ModelConfig
from topology_designer.app.services.embeddings import RoleRegistry
from topology_designer.app.services.generator import TopologyGenerator, param_layout
from topology_designer.app.services.ndkernel import ParamStore
from topology_designer.app.services.utils import atomic_write_bytes, atomic_write_text, read_json

FORMAT_VERSION = 1
_WIRE_DTYPES = {"float32": "<f4", "float64": "<f8"}


def payload_path(manifest_path: str) -> Path:
    return Path(manifest_path).with_suffix(".bin")


def save_checkpoint(path: str, model: TopologyGenerator, registry: Optional[RoleRegistry] = None) -> Path:
    config = model.config
    wire = _WIRE_DTYPES[config.dtype]
    names = [name for name in param_layout(config)]
    payload = b"".join(np.ascontiguousarray(model.params[name], dtype=wire).tobytes() for name in names)
    manifest = {
        "format_version": FORMAT_VERSION,
        "embedding_dim": config.d,
        "raw_dim": config.d_raw,
        "hidden_dim": config.d_h,
        "n_max": config.n_max,
        "dtype": config.dtype,
        "seed": config.seed,
        "use_task_embedding": config.use_task_embedding,
        "use_history_embedding": config.use_history_embedding,
        "payload": payload_path(path).name,
        "params": [{"name": name, "shape": list(model.params[name].shape)} for name in names],
        "registry_fingerprint": registry.fingerprint() if registry is not None else None,
        "roles": registry.names if registry is not None else None,
    }
    atomic_write_bytes(str(payload_path(path)), payload)
    atomic_write_text(path, json.dumps(manifest, indent=2) + "\n")
    logger.info(f"💾 Saved checkpoint {path} ({model.params.num_values()} values)")
    return Path(path)


def load_checkpoint(path: str, registry: Optional[RoleRegistry] = None) -> TopologyGenerator:
    manifest = read_json(path)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint format {manifest.get('format_version')!r}")
    config = ModelConfig(
        d=manifest["embedding_dim"],
        d_raw=manifest["raw_dim"],
        d_h=manifest["hidden_dim"],
        n_max=manifest["n_max"],
        dtype=manifest["dtype"],
        seed=manifest.get("seed", 0),
        use_task_embedding=manifest.get("use_task_embedding", True),
        use_history_embedding=manifest.get("use_history_embedding", True),
    )
    expected = {name: shape for name, (shape, _) in param_layout(config).items()}
    listed = {entry["name"]: tuple(entry["shape"]) for entry in manifest["params"]}
    if listed != expected:
        raise DimensionError(f"{path}: parameter list does not match the declared dimensions")

    data_file = Path(path).parent / manifest["payload"]
    if not data_file.exists():
        raise InputError(f"checkpoint payload not found: {data_file}")
    flat = np.frombuffer(data_file.read_bytes(), dtype=_WIRE_DTYPES[config.dtype])
    total = sum(int(np.prod(shape)) for shape in listed.values())
    if flat.size != total:
        raise DimensionError(f"{data_file}: payload has {flat.size} values, manifest needs {total}")

    params, offset = {}, 0
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape))
        params[entry["name"]] = flat[offset: offset + size].reshape(shape).astype(config.dtype)
        offset += size

    stored = manifest.get("registry_fingerprint")
    if registry is not None and stored is not None and stored != registry.fingerprint():
        # extension appends roles, so a changed registry is legal
        logger.warning(f"⚠️ Registry fingerprint differs from the one stored in {path}")
    logger.info(f"Loaded checkpoint {path}")
    return TopologyGenerator(config, ParamStore(params))
