from __future__ import annotations

import re
from dataclasses import dataclass

from lttune.workload import DEFAULT_TOKENIZER, Tokenizer

# Trailing spaces are part of the template text.
TEMPLATE = (
    "Recommend some configuration parameters for ${DBMS}$ to \n"
    "optimize the system's performance. Parameters might \n"
    "include system-level configurations, like memory, \n"
    "query optimizer or physical design configurations, \n"
    "like index recommendations.\n"
    "\n"
    "Each row in the following list has the following format: \n"
    "{a join key A}:{all the joins with A in the workload}\n"
    "${COMPRESSED_WORKLOAD}$\n"
    "\n"
    "The workload runs on a system with the following specs: \n"
    "memory: ${MEMORY} \n"
    "cores: ${CORES}"
)

FORMAT_INSTRUCTION = (
    "Return only executable SQL statements, one per line, inside a single fenced block."
)

_PLACEHOLDER = re.compile(r"\$\{")


@dataclass(frozen=True)
class HardwareSpec:
    memory_gb: float
    cores: int

    def __post_init__(self) -> None:
        if not self.memory_gb > 0:
            raise ValueError("memory_gb must be positive")
        if int(self.cores) != self.cores or self.cores < 1:
            raise ValueError("cores must be a positive integer")

    @property
    def memory_text(self) -> str:
        m = float(self.memory_gb)
        return f"{int(m)}GB" if m.is_integer() else f"{m:g}GB"


@dataclass(frozen=True)
class Prompt:
    text: str
    token_count: int


def build_prompt(dbms: str, compressed: str, hw: HardwareSpec,
                 tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> Prompt:
    if not dbms:
        raise ValueError("dbms must be non-empty")
    text = (TEMPLATE
            .replace("${DBMS}$", dbms)
            .replace("${COMPRESSED_WORKLOAD}$", compressed)
            .replace("${MEMORY}", hw.memory_text)
            .replace("${CORES}", str(int(hw.cores))))
    text = f"{text}\n\n{FORMAT_INSTRUCTION}"
    if _PLACEHOLDER.search(text):
        raise ValueError("unexpanded placeholder in prompt")
    return Prompt(text, tokenizer.count(text))


def template_overhead(dbms: str, hw: HardwareSpec, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> int:
    """Tokens the prompt costs with an empty workload section."""
    return build_prompt(dbms, "", hw, tokenizer).token_count
