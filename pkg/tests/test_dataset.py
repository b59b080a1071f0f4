import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedopenmax.dataset import DatasetSpec, generate, load_external, write_delimited
from fedopenmax.exceptions import InfeasibleSpecError, InvalidInputError, ParseError
from fedopenmax.openmax import UNKNOWN

SMALL = DatasetSpec(K=4, D=5, num_clients=3, train_per_class_per_client=7, test_per_class=6, num_unknown=25, seed=11)


def test_counts_and_iid_symmetry():
    data = generate(SMALL)
    assert len(data.client_train) == 3
    for part in data.client_train:
        assert part.X.shape == (4 * 7, 5)
        assert np.bincount(part.y, minlength=4).tolist() == [7] * 4
    assert np.bincount(data.closed_test.y).tolist() == [6] * 4
    assert data.open_test.X.shape == (4 * 6 + 25, 5)
    assert np.sum(data.open_test.y == UNKNOWN) == 25
    # the open set contains the closed set
    np.testing.assert_array_equal(data.open_test.X[:24], data.closed_test.X)


def test_paper_scale_counts():
    spec = DatasetSpec.paper_scale()
    assert (spec.K, spec.num_clients, spec.train_per_class_per_client) == (70, 5, 60)
    assert spec.K * spec.test_per_class + spec.num_unknown == 11_500


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), std=st.floats(0.1, 1.5))
def test_unknown_centers_keep_margin(seed, std):
    spec = DatasetSpec(K=5, D=4, num_clients=2, train_per_class_per_client=2, test_per_class=2, num_unknown=30,
                       cluster_std=std, seed=seed)
    data = generate(spec)
    d = np.linalg.norm(data.unknown_centers[:, None, :] - data.known_centers[None, :, :], axis=2)
    assert d.min() >= 3 * std
    assert np.all(np.abs(data.known_centers) <= spec.cluster_center_scale)
    assert np.all(np.abs(data.unknown_centers) <= spec.cluster_center_scale)


def test_deterministic():
    a, b = generate(SMALL), generate(SMALL)
    for x, y in zip(a.client_train + [a.open_test], b.client_train + [b.open_test]):
        assert x.X.tobytes() == y.X.tobytes() and x.y.tobytes() == y.y.tobytes()
    c = generate(DatasetSpec(**{**SMALL.to_dict(), "seed": 12}))
    assert not np.array_equal(a.known_centers, c.known_centers)


def test_infeasible_spec():
    # a 1-D interval of width 2 cannot fit a point 30 units away from anything
    spec = DatasetSpec(K=3, D=1, num_clients=1, train_per_class_per_client=1, test_per_class=1, num_unknown=1,
                       cluster_std=10.0, cluster_center_scale=1.0)
    with pytest.raises(InfeasibleSpecError):
        generate(spec)


@pytest.mark.parametrize("bad", [dict(K=0), dict(num_unknown=0), dict(cluster_std=0.0), dict(cluster_center_scale=-1)])
def test_invalid_spec(bad):
    with pytest.raises(InvalidInputError):
        DatasetSpec(**bad)


def test_load_external_example(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0, 1.0, 2.0\nunknown, 0.5, 0.5\n")
    data = load_external(p)
    assert data.y.tolist() == [0, UNKNOWN]
    assert data.X.tolist() == [[1.0, 2.0], [0.5, 0.5]]


def test_load_external_tsv_and_comments(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("# header\n\n3\t1e-3\n# mid\nunknown\t-2\n")
    data = load_external(p, "tsv")
    assert data.y.tolist() == [3, UNKNOWN] and data.X.ravel().tolist() == [1e-3, -2.0]


@pytest.mark.parametrize(
    "text, line",
    [
        ("", None),
        ("# only comments\n", None),
        ("0, 1.0, 2.0\n1, 1.0, 2.0, 3.0\n", 2),
        ("0, 1.0, x\n", 1),
        ("0, 1.0\nUnknown, 2.0\n", 2),
        ("0, 1.0\nunk, 2.0\n", 2),
        ("-1, 1.0\n", 1),
        ("0, 1.0\n1, nan\n", 2),
        ("0\n", 1),
    ],
)
def test_load_external_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as err:
        load_external(p)
    assert err.value.line == line
    if line is not None:
        assert f"bad.csv:{line}:" in str(err.value)


def test_write_then_load_is_exact(tmp_path):
    data = generate(SMALL)
    for fmt in ("csv", "tsv"):
        p = tmp_path / f"open.{fmt}"
        write_delimited(p, data.open_test, fmt, header_lines=["seed=11"])
        back = load_external(p, fmt)
        assert back.X.tobytes() == data.open_test.X.tobytes()
        assert back.y.tolist() == data.open_test.y.tolist()
