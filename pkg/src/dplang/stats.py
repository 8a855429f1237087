"""Binomial confidence intervals used for every frequency estimate."""

from scipy.stats import binomtest


def wilson_interval(successes, trials, confidence=0.95):
    """Two-sided Wilson score interval for a binomial proportion.

    Args:
        successes: Observed count.
        trials: Number of trials (>= 1).
        confidence: Coverage level.

    Returns:
        ``(low, high)`` as floats.
    """
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def wilson_upper(successes, trials, confidence=0.95):
    """One-sided Wilson upper confidence bound."""
    return wilson_interval(successes, trials, 2 * confidence - 1)[1]


def wilson_lower(successes, trials, confidence=0.95):
    """One-sided Wilson lower confidence bound."""
    return wilson_interval(successes, trials, 2 * confidence - 1)[0]
