from typing import Iterable, Optional

import numpy as np


def compound(returns: Iterable[float]) -> float:
    """
    Compound a sequence of simple returns.

    Args:
        returns (Iterable[float]): Per-period returns as decimal fractions.

    Returns:
        float: prod(1 + r) - 1.
    """
    values = np.asarray(list(returns), dtype="float64")
    return float(np.prod(1.0 + values) - 1.0)


def significance_stars(pvalue: float, levels: Iterable[float] = (0.01, 0.05, 0.10)) -> str:
    """
    One star per level the p-value falls below.

    Args:
        pvalue (float): Two-sided p-value.
        levels (Iterable[float]): Significance levels, any order.

    Returns:
        str: "", "*", "**" or "***".
    """
    if pvalue is None or not np.isfinite(pvalue):
        return ""
    return "*" * sum(1 for level in levels if pvalue < level)


def format_number(value: Optional[float], decimals: int = 2, scale: float = 1.0) -> str:
    """Fixed-decimal text; missing values render as an empty string."""
    if value is None or not np.isfinite(value):
        return ""
    out = f"{value * scale:.{decimals}f}"
    return "0." + "0" * decimals if out == "-0." + "0" * decimals else out


def format_tstat(value: Optional[float], decimals: int = 2) -> str:
    """Bracketed t-statistic, e.g. "[2.88]"."""
    text = format_number(value, decimals)
    return f"[{text}]" if text else ""
