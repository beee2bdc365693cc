import numpy as np
import pytest

from chairspace import blobshape as bs
from chairspace import embedding as em


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in getattr(rep, "nodeid", ""):
                name = rep.nodeid.split("::")[-1]
                rows.append((name, outcome))
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, outcome in rows:
            flag = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"{flag}  {name}")


def make_iso_blob_shape(lam: float = 0.04, weight: float = 1.0,
                        center=(0.0, 0.0, 0.0)) -> bs.Shape:
    """One live isotropic blob plus 15 zero-weight fillers."""
    parts = [bs.PartLatent(center=center, eigenvalues=[lam] * 3,
                           eigenvectors=np.eye(3), blend_weight=weight)]
    parts += [bs.PartLatent(center=[0, 0, 0], eigenvalues=[0.01] * 3,
                            eigenvectors=np.eye(3), blend_weight=0.0)
              for _ in range(bs.N_PARTS - 1)]
    return bs.Shape(id="iso", parts=tuple(parts), provenance="corpus")


def random_orthonormal(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


@pytest.fixture(scope="session")
def corpus120():
    return [bs.generate_procedural_chair(a, s) for a in bs.ARCHETYPES for s in range(24)]


@pytest.fixture(scope="session")
def model120(corpus120):
    vectors = np.array([bs.flatten(s) for s in corpus120])
    return em.fit_embedding(vectors, em.EmbeddingParams(n_neighbors=15, n_epochs=60))


@pytest.fixture(scope="session")
def archetype600():
    shapes = [bs.generate_procedural_chair(a, s)
              for a in ("armchair", "dining", "stool") for s in range(200)]
    vectors = np.array([bs.flatten(s) for s in shapes])
    labels = np.repeat([0, 1, 2], 200)
    return shapes, vectors, labels


@pytest.fixture(scope="session")
def model600(archetype600):
    _, vectors, _ = archetype600
    return em.fit_embedding(vectors, em.EmbeddingParams())


@pytest.fixture(scope="session")
def corpus2000():
    return list(bs.generate_corpus(2000, seed=42))


@pytest.fixture(scope="session")
def model2000(corpus2000):
    vectors = np.array([bs.flatten(s) for s in corpus2000])
    return em.fit_embedding(vectors, em.EmbeddingParams())
