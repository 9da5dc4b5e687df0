"""Checker configuration."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class CheckConfig:
    """Knobs for the static checker and its witness search."""
    fuel: int = 1000               # simplifier rewrites per variant
    inline_depth: int = 3          # inlinings of one function along a call chain
    samples: int = 200             # witness-search / oracle samples
    seed: int = 0
    gamma_cap: int = 64            # orElse variants per transaction
    witness_search: bool = True
    oracle_fuel: int = 10_000      # interpreter steps per oracle run
    strict_modular: bool = False   # callees without contracts are errors instead of inlined

    def with_overrides(self, **changes) -> "CheckConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


DEFAULT_CONFIG = CheckConfig()
