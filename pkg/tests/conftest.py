import numpy as np

from woe_engine.model import Assumption, ClassStats, GaussianEvidenceModel, Label


def random_spd(rng, d, jitter=0.5):
    a = rng.normal(size=(d, d))
    return a @ a.T + jitter * np.eye(d)


def make_model(seed=0, k=3, d=4, assumption=Assumption.DEPENDENT, priors=None, spread=2.0):
    """Random well-conditioned model built directly from statistics."""
    rng = np.random.default_rng(seed)
    if priors is None:
        priors = np.full(k, 1.0 / k)
    priors = np.asarray(priors, dtype=float)
    priors = priors / priors.sum()
    stats = tuple(
        ClassStats(
            mean=rng.normal(scale=spread, size=d),
            covariance=random_spd(rng, d),
            prior=float(p),
        )
        for p in priors
    )
    labels = tuple(Label(id=i, name=f"h{i}") for i in range(k))
    names = tuple(f"f{i}" for i in range(d))
    return GaussianEvidenceModel(
        labels=labels, feature_names=names, per_class=stats, assumption=assumption
    )


def make_diagonal_model(seed=0, k=2, d=3, assumption=Assumption.DEPENDENT):
    rng = np.random.default_rng(seed)
    stats = tuple(
        ClassStats(
            mean=rng.normal(size=d),
            covariance=np.diag(rng.uniform(0.5, 2.0, size=d)),
            prior=1.0 / k,
        )
        for _ in range(k)
    )
    labels = tuple(Label(id=i, name=f"h{i}") for i in range(k))
    return GaussianEvidenceModel(
        labels=labels,
        feature_names=tuple(f"f{i}" for i in range(d)),
        per_class=stats,
        assumption=assumption,
    )


# ---------------------------------------------------------------------------
# Acceptance reporting: one pass/fail line per criterion in the summary.
# ---------------------------------------------------------------------------

_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" not in report.nodeid:
        return
    _acceptance_results.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")
