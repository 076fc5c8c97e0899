import numpy as np
import pytest

from mvzero.bank import Layer2Entry, PromptBank
from mvzero.embeddings import EmbeddingMatrix
from mvzero.synthetic import SyntheticSpec, generate_synthetic

# the reference fixture: 500 shapes, 4 clean + 16 ambiguous views each,
# layer-2 entries for all candidate sets of sizes 2..4
REFERENCE_SPEC = SyntheticSpec(
    num_classes=10,
    dim=64,
    shapes_per_class=50,
    views_per_shape=20,
    clean_views=4,
    noise_sigma=0.01,
    ambiguous_view_mode="wrong_class_leak",
    seed=7,
    candidate_sizes=(2, 3, 4),
)


@pytest.fixture(scope="session")
def ref_data():
    return generate_synthetic(REFERENCE_SPEC)


def unit_rows(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    data = rng.standard_normal((rows, cols))
    return (data / np.linalg.norm(data, axis=1, keepdims=True)).astype(np.float32)


def make_bank(layer1_rows: np.ndarray, classes: list[str] | None = None) -> PromptBank:
    if classes is None:
        classes = [f"c{i}" for i in range(layer1_rows.shape[0])]
    return PromptBank(
        classes=classes,
        layer1=EmbeddingMatrix(layer1_rows.astype(np.float32), normalized=True),
    )


def add_entry(bank: PromptBank, class_names: list[str], rows: np.ndarray) -> Layer2Entry:
    ordered = sorted(class_names, key=bank.class_index.__getitem__)
    entry = Layer2Entry(
        candidate_classes=ordered,
        embeddings=EmbeddingMatrix(rows.astype(np.float32), normalized=True),
        prompt_texts=[f"description of {c}" for c in ordered],
    )
    bank.layer2["|".join(ordered)] = entry
    return entry
