"""GRPO training of a tag-structured policy for tabular prediction."""

from ._core import (
    Architecture,
    ParsedResponse,
    RewardBreakdown,
    TabgrpoError,
    clipped_term,
    group_stats,
    init_params,
    kl_term,
    logprobs,
    parse_response,
    relative_advantages,
    run_cli,
    score,
    weighted_f1,
)

__all__ = [
    "Architecture",
    "ParsedResponse",
    "RewardBreakdown",
    "TabgrpoError",
    "clipped_term",
    "group_stats",
    "init_params",
    "kl_term",
    "logprobs",
    "parse_response",
    "relative_advantages",
    "run_cli",
    "score",
    "weighted_f1",
]
