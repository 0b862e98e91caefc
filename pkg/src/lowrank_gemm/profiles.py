"""Hardware profile files and the registry of shipped accelerator profiles.

Profiles are data, never code: every hardware constant the cost and
performance models consume lives in one ``.profile`` file per accelerator, so
tests and the CLI cite a single source of truth.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

from .errors import ProfileError
from .kvformat import KvParseError, parse_float, parse_int, parse_kv_text, serialize_kv
from .matrices import Precision
from .selector import HardwareProfile

__all__ = [
    "PROFILE_FIELDS",
    "ProfileRegistry",
    "load_profile",
    "parse_profile_text",
    "serialize_profile",
    "builtin_profiles",
    "resolve_profile",
]

#: Exact field names of the on-disk format, in canonical order.
PROFILE_FIELDS = (
    "name",
    "mem_bandwidth_bytes_per_s",
    "peak_flops_fp32",
    "peak_flops_fp16",
    "peak_flops_fp8",
    "memory_capacity_bytes",
    "launch_overhead_s_direct",
    "launch_overhead_s_lowrank",
)


def parse_profile_text(text: str, source: str = "<string>") -> HardwareProfile:
    """Parse and invariant-check one profile document."""
    try:
        entries = parse_kv_text(text, source)
    except KvParseError as exc:
        raise ProfileError(str(exc)) from exc
    missing = [f for f in PROFILE_FIELDS if f not in entries]
    if missing:
        raise ProfileError(f"{source}: missing required field(s): {', '.join(missing)}")
    unknown = [k for k in entries if k not in PROFILE_FIELDS]
    if unknown:
        raise ProfileError(f"{source}: unknown field(s): {', '.join(unknown)}")
    try:
        profile = HardwareProfile(
            name=entries["name"],
            mem_bandwidth_bytes_per_s=parse_float(entries, "mem_bandwidth_bytes_per_s", source),
            peak_flops={
                Precision.FP32: parse_float(entries, "peak_flops_fp32", source),
                Precision.FP16: parse_float(entries, "peak_flops_fp16", source),
                Precision.FP8: parse_float(entries, "peak_flops_fp8", source),
            },
            memory_capacity_bytes=parse_int(entries, "memory_capacity_bytes", source),
            launch_overhead_s_direct=parse_float(entries, "launch_overhead_s_direct", source),
            launch_overhead_s_lowrank=parse_float(entries, "launch_overhead_s_lowrank", source),
        )
    except KvParseError as exc:
        raise ProfileError(str(exc)) from exc
    except ValueError as exc:
        raise ProfileError(f"{source}: {exc}") from exc
    return profile


def serialize_profile(profile: HardwareProfile) -> str:
    """Canonical form: one ``key = value`` line per field, field order fixed."""
    return serialize_kv(
        (
            ("name", profile.name),
            ("mem_bandwidth_bytes_per_s", repr(profile.mem_bandwidth_bytes_per_s)),
            ("peak_flops_fp32", repr(profile.peak_flops[Precision.FP32])),
            ("peak_flops_fp16", repr(profile.peak_flops[Precision.FP16])),
            ("peak_flops_fp8", repr(profile.peak_flops[Precision.FP8])),
            ("memory_capacity_bytes", profile.memory_capacity_bytes),
            ("launch_overhead_s_direct", repr(profile.launch_overhead_s_direct)),
            ("launch_overhead_s_lowrank", repr(profile.launch_overhead_s_lowrank)),
        )
    )


def load_profile(path: str | Path) -> HardwareProfile:
    """Load one profile file; parse errors carry file and field context."""
    path = Path(path)
    return parse_profile_text(path.read_text(encoding="utf-8"), source=str(path))


@dataclass(frozen=True)
class ProfileRegistry:
    """Uniquely named profiles plus where each came from."""

    profiles: dict[str, HardwareProfile]
    source_paths: tuple[str, ...]

    def __post_init__(self) -> None:
        for name, profile in self.profiles.items():
            if name != profile.name:
                raise ProfileError(f"registry key {name!r} does not match profile name {profile.name!r}")

    def get(self, name: str) -> HardwareProfile:
        if name not in self.profiles:
            known = ", ".join(sorted(self.profiles))
            raise ProfileError(f"unknown profile {name!r}; shipped profiles: {known}")
        return self.profiles[name]

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.profiles))


def builtin_profiles() -> ProfileRegistry:
    """Registry of the shipped accelerator profiles (rtx4090, h200, b200)."""
    profiles: dict[str, HardwareProfile] = {}
    sources: list[str] = []
    data_dir = importlib.resources.files("lowrank_gemm") / "data"
    for entry in sorted(data_dir.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".profile"):
            continue
        profile = parse_profile_text(entry.read_text(encoding="utf-8"), source=entry.name)
        if profile.name in profiles:
            raise ProfileError(f"duplicate shipped profile name {profile.name!r}")
        profiles[profile.name] = profile
        sources.append(entry.name)
    return ProfileRegistry(profiles=profiles, source_paths=tuple(sources))


def resolve_profile(name_or_path: str) -> HardwareProfile:
    """Interpret a CLI argument as a shipped profile name, else a file path."""
    registry = builtin_profiles()
    if name_or_path in registry.profiles:
        return registry.profiles[name_or_path]
    if Path(name_or_path).exists():
        return load_profile(name_or_path)
    raise ProfileError(
        f"{name_or_path!r} is neither a shipped profile ({', '.join(registry.names())}) "
        "nor an existing file"
    )
