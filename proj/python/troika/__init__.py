"""Control plane for long-horizon problem solving.

The heavy lifting lives in the compiled ``_core`` module; this package
re-exports its operations under stable names.
"""

from ._core import (
    default_config,
    detect_plan_blocked,
    extract_tags,
    parse_verdict,
    resume,
    run,
    summarize,
    validate_config,
)

__all__ = [
    "default_config",
    "detect_plan_blocked",
    "extract_tags",
    "parse_verdict",
    "resume",
    "run",
    "summarize",
    "validate_config",
]
