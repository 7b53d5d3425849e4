import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from malliavin_sgd.model import ModelSpec, black_scholes_model

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# acceptance verdicts, filled in by test_acceptance.py and printed at the end
ACCEPTANCE = {}


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


def poly_model(rng, d, scale=0.05, sigma0=1.0):
    """Random model whose drift and diffusion entries are quadratic
    polynomials in x, with analytic first and second derivatives.

    Field j has components a[j] + b[j] x + x^T C[j] x.  Diffusion columns sit
    near sigma0 * e_j so the model is elliptic on the unit ball.
    """
    a = rng.normal(0, 1, (d + 1, d))
    a[1:] = sigma0 * np.eye(d) + scale * rng.normal(0, 1, (d, d))
    b = scale * rng.normal(0, 1, (d + 1, d, d))
    C = scale * rng.normal(0, 1, (d + 1, d, d, d))
    C = 0.5 * (C + np.swapaxes(C, -1, -2))

    def fld(j, x):
        return a[j] + np.einsum("cp,...p->...c", b[j], x) + np.einsum("ckl,...k,...l->...c", C[j], x, x)

    def drift(x):
        return fld(0, np.asarray(x, dtype=float))

    def diffusion(x):
        x = np.asarray(x, dtype=float)
        return np.stack([fld(j, x) for j in range(1, d + 1)], axis=-1)

    def first(j, x):
        x = np.asarray(x, dtype=float)
        return b[j] + 2 * np.einsum("ckl,...l->...ck", C[j], x)

    def second(j, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2 * C[j], x.shape[:-1] + (d, d, d)).copy()

    return ModelSpec(d, drift, diffusion, first, second, name="poly")


def constant_model(d, b=0.3, s=0.7):
    bvec = np.full(d, b)
    smat = s * np.eye(d) + 0.1 * np.triu(np.ones((d, d)), 1)
    return ModelSpec(
        d,
        lambda x: np.broadcast_to(bvec, np.shape(x)).copy(),
        lambda x: np.broadcast_to(smat, np.shape(x)[:-1] + (d, d)).copy(),
        lambda j, x: np.zeros(np.shape(x) + (d,)),
        lambda j, x: np.zeros(np.shape(x) + (d, d)),
        name="constant",
    )


@pytest.fixture
def bs1():
    return black_scholes_model(1, 0.2)


@pytest.fixture
def bs10():
    return black_scholes_model(10, 0.2)
