"""Compile gate: syntactic verification through an external C++ compiler."""

from __future__ import annotations

import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path


class ToolchainMissing(RuntimeError):
    pass


@dataclass(frozen=True)
class ToolchainConfig:
    compiler: str = "g++"
    include_dirs: tuple[str, ...] = ()
    extra_flags: tuple[str, ...] = ()
    timeout: float = 60.0

    @classmethod
    def from_dict(cls, doc: dict) -> "ToolchainConfig":
        return cls(
            compiler=doc.get("compiler", "g++"),
            include_dirs=tuple(doc.get("include_dirs", ())),
            extra_flags=tuple(doc.get("extra_flags", ())),
            timeout=float(doc.get("timeout", 60.0)),
        )


def verify_compiles(source: str, toolchain: ToolchainConfig) -> tuple[bool, str]:
    """Compile the text as a translation unit; diagnostics captured verbatim."""
    with tempfile.TemporaryDirectory(prefix="vulnreason-cc-") as tmp:
        path = Path(tmp) / "variant.cpp"
        path.write_text(source, encoding="utf-8")
        argv = [toolchain.compiler, "-c", str(path), "-o", str(Path(tmp) / "variant.o")]
        for inc in toolchain.include_dirs:
            argv.append(f"-I{inc}")
        argv.extend(toolchain.extra_flags)
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=toolchain.timeout
            )
        except FileNotFoundError as exc:
            raise ToolchainMissing(f"compiler not found: {toolchain.compiler}") from exc
        except subprocess.TimeoutExpired:
            return (False, f"compiler timed out after {toolchain.timeout}s")
        return (proc.returncode == 0, proc.stderr)
