"""Operator specifications and the registry manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..concepts import TypeSignature, format_port, parse_port


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    unit: str | None = None
    required: bool = True


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    signature: TypeSignature
    params: tuple[ParamSpec, ...] = ()
    provider_backed: bool = False
    description: str = ""

    @property
    def required_params(self) -> list[ParamSpec]:
        return [p for p in self.params if p.required]

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "inputs": [format_port(p) for p in self.signature.inputs],
            "outputs": [format_port(p) for p in self.signature.outputs],
            "variadic": self.signature.variadic,
            "params": [{"name": p.name, "unit": p.unit, "required": p.required} for p in self.params],
            "provider_backed": self.provider_backed,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "OperatorSpec":
        try:
            signature = TypeSignature(
                inputs=tuple(parse_port(p) for p in obj["inputs"]),
                outputs=tuple(parse_port(p) for p in obj["outputs"]),
                variadic=bool(obj.get("variadic", False)),
            )
            params = tuple(
                ParamSpec(p["name"], p.get("unit"), bool(p.get("required", True))) for p in obj.get("params", [])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RegistryError(f"bad operator entry {obj.get('name')!r}: {exc}") from None
        return cls(
            name=obj["name"],
            signature=signature,
            params=params,
            provider_backed=bool(obj.get("provider_backed", False)),
            description=obj.get("description", ""),
        )


# (inputs, params, env) -> outputs
Implementation = Callable[[list, dict, Any], list]


@dataclass
class OperatorRegistry:
    specs: dict[str, OperatorSpec] = field(default_factory=dict)
    implementations: dict[str, Implementation] = field(default_factory=dict)
    version: str = "0"

    def register(self, spec: OperatorSpec, impl: Implementation | None = None) -> None:
        if spec.name in self.specs:
            raise RegistryError(f"duplicate operator {spec.name!r}")
        self.specs[spec.name] = spec
        if impl is not None:
            self.implementations[spec.name] = impl

    def __contains__(self, name: object) -> bool:
        return name in self.specs

    def __getitem__(self, name: str) -> OperatorSpec:
        return self.specs[name]

    def get(self, name: str | None) -> OperatorSpec | None:
        return self.specs.get(name) if name is not None else None

    def names(self) -> list[str]:
        return sorted(self.specs)

    def implementation(self, name: str) -> Implementation:
        try:
            return self.implementations[name]
        except KeyError:
            raise RegistryError(f"operator {name!r} has no implementation") from None

    def concurrency_safe(self, name: str, provider: Any) -> bool:
        """Pure kernels always are; provider-backed ones only if the provider says so."""
        spec = self.specs[name]
        if not spec.provider_backed:
            return True
        return bool(getattr(provider, "thread_safe", False))

    @classmethod
    def from_manifest(cls, obj: dict[str, Any], implementations: dict[str, Implementation] | None = None):
        registry = cls(version=str(obj.get("version", "0")))
        impls = implementations or {}
        for entry in obj.get("operators", []):
            spec = OperatorSpec.from_dict(entry)
            registry.register(spec, impls.get(spec.name))
        return registry

    def to_manifest(self) -> dict[str, Any]:
        return {"version": self.version, "operators": [self.specs[n].to_dict() for n in self.names()]}


def load_registry(path: str | Path, implementations: dict[str, Implementation] | None = None) -> OperatorRegistry:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RegistryError(f"cannot load registry manifest {path}: {exc}") from None
    if implementations is None:
        from .bindings import IMPLEMENTATIONS

        implementations = IMPLEMENTATIONS
    return OperatorRegistry.from_manifest(obj, implementations)

