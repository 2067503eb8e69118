import pytest

from finslerkit.catalog import builtin_catalog, builtin_metric
from finslerkit.dsl import parse_metric
from finslerkit.identities import identity_suite, validate_metric
from finslerkit.report import FAIL, PASS
from finslerkit.sampling import SampleConfig

SMALL = SampleConfig(seed=21, count=25)


@pytest.mark.parametrize("entry", builtin_catalog(), ids=lambda e: e.name)
def test_catalog_validates_with_expected_index(entry):
    report = validate_metric(entry.metric, SMALL)
    assert report.verdict == PASS, report.to_text()
    assert report.info["index_k"] == entry.index


@pytest.mark.parametrize("entry", builtin_catalog(), ids=lambda e: e.name)
def test_identity_suite_passes(entry):
    report = identity_suite(entry.metric, SMALL, expected_index=entry.index)
    assert report.verdict == PASS, report.to_text()


def test_degenerate_metric_fails_nondegeneracy():
    report = validate_metric(parse_metric("dim=2, F=y1, cone=[y1]"), SMALL)
    assert report["g nondegenerate"].verdict == FAIL
    assert report.verdict == FAIL


def test_non_homogeneous_metric_fails():
    m = parse_metric("dim=2, F=sqrt(y1^2 + y2^2) + 0.1*y1^2, cone=[y1^2 + y2^2]")
    report = validate_metric(m, SMALL)
    assert report["F(x,ty) = t F(x,y)"].verdict == FAIL
    assert report["Euler: y.dF/dy = F"].verdict == FAIL


def test_spray_fault_injection_is_caught():
    # a constant offset on G^1 leaves N = dG/dy, hence Gamma, untouched;
    # it breaks the bracket, horizontality and homogeneity identities instead
    report = identity_suite(builtin_metric("euclidean2"), SMALL, spray_fault=0.01)
    assert report.verdict == FAIL
    for name in ("[C,S] = S", "h S = S (spray horizontal)", "G(x,ty) = t^2 G(x,y)"):
        assert report[name].verdict == FAIL
        assert report[name].witness is not None
    assert report["Gamma^2 = Id"].verdict == PASS


def test_n2_and_n3_euclidean():
    for name in ("euclidean2", "euclidean3"):
        assert identity_suite(builtin_metric(name), SMALL).verdict == PASS


def test_report_serializes():
    report = identity_suite(builtin_metric("randers03"), SampleConfig(seed=1, count=3))
    doc = report.to_dict()
    assert doc["seed"] == 1 and doc["count"] == 3
    assert {c["check"] for c in doc["checks"]} >= {"J(S) = C", "Gamma^2 = Id", "index(GF) = 2k"}
    assert all(c["samples"] == 3 for c in doc["checks"] if c["check"] not in ("G(x,ty) = t^2 G(x,y)", "N(x,ty) = t N(x,y)"))
