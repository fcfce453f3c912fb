import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trihetgcn.evaluation import (EvalReport, aggregate, ap, auc, markdown_table,
                                  read_report_csv, write_report_csv)

from conftest import brute_ap, brute_auc


def test_auc_examples():
    assert auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]) == 0.75


def test_ap_examples():
    assert ap([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert ap([0.9, 0.8, 0.7], [0, 1, 1]) == pytest.approx(0.5 * 0.5 + 0.5 * 2 / 3, abs=1e-15)
    assert ap([0.9, 0.8, 0.7], [0, 1, 1]) == pytest.approx(0.58333, abs=1e-5)


@pytest.mark.parametrize("k", [1, 2, 5, 10])
def test_ap_single_positive_at_rank_k(k):
    scores = np.arange(10, 0, -1, dtype=float)
    labels = np.zeros(10)
    labels[k - 1] = 1
    assert ap(scores, labels) == pytest.approx(1 / k, abs=1e-15)


def test_ap_ties_form_one_block():
    # both items at one threshold: precision 1/2 at recall 1
    assert ap([0.5, 0.5], [1, 0]) == 0.5
    assert ap([0.5, 0.5], [0, 1]) == 0.5


def test_errors():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        ap([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError):
        auc([0.1], [1, 0])
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 2])


scored = st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 8).map(lambda v: v / 8), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


@settings(max_examples=300, deadline=None)
@given(scored)
def test_metrics_match_brute_force(data):
    scores, labels = data
    if 0 < sum(labels) < len(labels):
        assert abs(auc(scores, labels) - brute_auc(scores, labels)) < 1e-12
    if sum(labels) > 0:
        assert abs(ap(scores, labels) - brute_ap(scores, labels)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(scored)
def test_metrics_invariant_under_monotone_maps(data):
    scores, labels = data
    if not 0 < sum(labels) < len(labels):
        return
    s = np.asarray(scores)
    mapped = np.exp(3 * s) - 7
    assert auc(mapped, labels) == pytest.approx(auc(s, labels), abs=1e-15)
    assert ap(mapped, labels) == pytest.approx(ap(s, labels), abs=1e-15)


def test_aggregate():
    r = aggregate([0.70, 0.74], [0.5, 0.6], "cn", "cora")
    assert round(r.auc_mean, 2) == 72.00
    assert round(r.auc_std, 2) == 2.83
    assert not r.std_flagged
    one = aggregate([0.8], [0.7])
    assert one.auc_std == 0.0 and one.std_flagged
    with pytest.raises(ValueError):
        aggregate([], [])


def test_report_csv_roundtrip(tmp_path):
    reps = [aggregate([0.7, 0.74], [0.5, 0.6], "cn", "cora", "abc"),
            EvalReport("katz", "power", 3, 60.0, 1.0, 55.5, 2.0, "def", failures=1, eval_hash="ff")]
    write_report_csv(reps, tmp_path / "r.csv")
    back = read_report_csv(tmp_path / "r.csv")
    assert [(r.method, r.dataset, r.failures, r.eval_hash) for r in back] == \
        [("cn", "cora", 0, ""), ("katz", "power", 1, "ff")]
    assert back[0].auc_mean == 72.0


def test_markdown_table():
    reps = [EvalReport("cn", "cora", 2, 72.0, 2.83, 70.0, 1.0),
            EvalReport("cn", "power", 2, 58.0, 0.5, 57.0, 0.2),
            EvalReport("trihet", "cora", 2, 93.0, 1.0, 94.0, 1.0)]
    md = markdown_table(reps, "auc").splitlines()
    assert md[0] == "| | cora | power |"
    assert md[2] == "| cn | 72.00 ± 2.83 | 58.00 ± 0.50 |"
    assert md[3] == "| trihet | 93.00 ± 1.00 |  |"
