"""Extensible role pool: frozen base embeddings plus the END slot."""
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from topology_designer.app.core.errors import ConflictError, DimensionError, InputError, LookupFailure
from topology_designer.app.core.logger import logger

from .embedding_generator import EmbeddingProvider, normalize_embedding

END_TOKEN = "<END>"


class RoleSpec(BaseModel):
    """One role-pool entry. Unknown fields in pool files are ignored."""

    model_config = ConfigDict(extra="ignore", frozen=True)

    name: str
    description: str = ""
    embedding: Optional[tuple[float, ...]] = None

    @field_validator("name")
    @classmethod
    def _named(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("role name must be non-empty")
        return value

    def text(self) -> str:
        return f"{self.name}: {self.description}" if self.description else self.name


RoleInput = Union[RoleSpec, tuple[str, str], dict]


@dataclass(frozen=True, eq=False)
class RoleEntry:
    name: str
    description: str
    base_embedding: np.ndarray


@dataclass(frozen=True, eq=False)
class RoleRegistry:
    """Ordered roles with read-only base rows; extension returns a new registry."""

    roles: tuple[RoleEntry, ...]
    end_embedding: np.ndarray
    d_raw: int

    def __len__(self) -> int:
        return len(self.roles)

    @property
    def names(self) -> list[str]:
        return [role.name for role in self.roles]

    @property
    def end_index(self) -> int:
        return len(self.roles)

    def index(self, name: str) -> int:
        for k, role in enumerate(self.roles):
            if role.name == name:
                return k
        raise LookupFailure(f"role {name!r} is not in the registry")

    def name_of(self, index: int) -> str:
        if index == self.end_index:
            return END_TOKEN
        if not 0 <= index < len(self.roles):
            raise LookupFailure(f"role index {index} is out of range for {len(self.roles)} roles")
        return self.roles[index].name

    def row(self, index: int) -> np.ndarray:
        if not 0 <= index < len(self.roles):
            raise LookupFailure(f"role index {index} is out of range for {len(self.roles)} roles")
        return self.roles[index].base_embedding

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for role in self.roles:
            digest.update(role.name.encode("utf-8") + b"\x00")
            digest.update(role.base_embedding.astype("<f4").tobytes())
        return digest.hexdigest()


def _frozen(vector: np.ndarray) -> np.ndarray:
    vector = np.array(vector, dtype=np.float32, copy=True)
    vector.flags.writeable = False
    return vector


def _as_spec(item: RoleInput) -> RoleSpec:
    if isinstance(item, RoleSpec):
        return item
    if isinstance(item, dict):
        return RoleSpec.model_validate(item)
    name, description = item
    return RoleSpec(name=name, description=description)


def _entries(specs: Sequence[RoleSpec], provider: EmbeddingProvider, taken: Iterable[str]) -> list[RoleEntry]:
    seen = set(taken)
    entries = []
    for spec in specs:
        if spec.name in seen:
            raise ConflictError(f"duplicate role name {spec.name!r}")
        seen.add(spec.name)
        if spec.embedding is not None:
            if len(spec.embedding) != provider.d_raw:
                raise DimensionError(
                    f"role {spec.name!r} embedding has length {len(spec.embedding)}, expected {provider.d_raw}"
                )
            row = normalize_embedding(spec.embedding)
        else:
            row = provider.embed(spec.text())
        entries.append(RoleEntry(spec.name, spec.description, _frozen(row)))
    return entries


def end_token_embedding(d_raw: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return _frozen(normalize_embedding(rng.standard_normal(d_raw)))


def register_roles(
    descriptions: Sequence[RoleInput], provider: EmbeddingProvider, seed: int = 0
) -> RoleRegistry:
    specs = [_as_spec(item) for item in descriptions]
    registry = RoleRegistry(
        roles=tuple(_entries(specs, provider, ())),
        end_embedding=end_token_embedding(provider.d_raw, seed),
        d_raw=provider.d_raw,
    )
    logger.info(f"Registered {len(registry)} roles (d_raw={provider.d_raw})")
    return registry


def extend_registry(
    registry: RoleRegistry, new_roles: Sequence[RoleInput], provider: EmbeddingProvider
) -> RoleRegistry:
    """Append roles; existing rows and the END row are shared, not copied."""
    if provider.d_raw != registry.d_raw:
        raise DimensionError(f"provider d_raw {provider.d_raw} does not match registry d_raw {registry.d_raw}")
    specs = [_as_spec(item) for item in new_roles]
    if not specs:
        return registry
    added = _entries(specs, provider, registry.names)
    logger.info(f"Extended registry with {len(added)} roles: {[e.name for e in added]}")
    return RoleRegistry(roles=registry.roles + tuple(added), end_embedding=registry.end_embedding, d_raw=registry.d_raw)


def load_role_pool(path: str) -> list[RoleSpec]:
    source = Path(path)
    if not source.exists():
        raise InputError(f"role pool file not found: {path}")
    try:
        with open(source, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, list):
            raise InputError(f"{path}: role pool must be a JSON array")
        return [RoleSpec.model_validate(item) for item in raw]
    except (json.JSONDecodeError, TypeError, KeyError, ValidationError) as e:
        raise InputError(f"{path}: malformed role pool: {e}") from e


def role_pool_to_json(specs: Sequence[RoleSpec]) -> str:
    return json.dumps([spec.model_dump(exclude_none=True) for spec in specs], indent=2, ensure_ascii=False) + "\n"
