import json
from pathlib import Path

import pytest

from soliton_forge import specfile as spf
from soliton_forge.specfile import SpecError

SPECS = Path(__file__).resolve().parents[1] / "specs"

WARPED = {"warped": {"phi": "cosh(r)", "fiber": "H3", "interval": [0, 1]}, "sampling": {"seed": 0}}


def _load(doc):
    return spf.load_document(doc, SPECS, "<test>")


def test_shipped_specs_load():
    for path in sorted(SPECS.glob("*.json")):
        spec = spf.load(path)
        assert spec.seed is not None, path


def test_metric_spec():
    spec = spf.load(SPECS / "round-sphere.json")
    assert spec.chart.n == 4 and spec.count == 40 and spec.seed == 1
    assert spec.soliton.lam == 12 and spec.expect["scalar"] == 12


def test_warped_spec():
    spec = _load(WARPED)
    assert spec.wchart is not None and spec.chart is spec.wchart.chart
    assert spec.count == 40 and spec.soliton is None


def test_profile_spec_has_no_chart():
    spec = spf.load(SPECS / "quasi-profile.json")
    assert spec.chart is None and spec.profile_request["m"] == 2


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(colour="red"),
    lambda d: d["sampling"].pop("seed"),
    lambda d: d.update(m=0),
    lambda d: d.update(potential="r"),
    lambda d: d["warped"].update(fiber="T3"),
    lambda d: d.update(tolerances={"soliton": -1}),
    lambda d: d.update(metric=[["1"]]),
    lambda d: d.update(dimension=3),
])
def test_schema_rejections(mutate):
    doc = json.loads(json.dumps(WARPED))
    mutate(doc)
    with pytest.raises(SpecError):
        _load(doc)


def test_metric_dimension_consistency():
    doc = {"dimension": 3, "coordinates": ["a", "b", "c"], "domain": [[0, 1]] * 3,
           "metric": [["1", "0"], ["0", "1"]], "sampling": {"seed": 0}}
    with pytest.raises(SpecError):
        _load(doc)


def test_bad_expression_is_spec_error():
    doc = json.loads(json.dumps(WARPED))
    doc["warped"]["phi"] = "cosh(q)"
    with pytest.raises(SpecError):
        _load(doc)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(SpecError):
        spf.load(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SpecError):
        spf.load(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(SpecError):
        spf.load(bad)


def test_tolerance_overrides():
    t = spf.Tolerances().with_overrides({"soliton": 1e-4}, tol=None)
    assert t.soliton == 1e-4 and t.d_weyl == spf.Tolerances().d_weyl
    t = spf.Tolerances().with_overrides(None, tol=1e-3)
    assert t.soliton == t.d_weyl == t.warped_identity == 1e-3
    assert t.riemann_symmetry == spf.Tolerances().riemann_symmetry


def test_m_values():
    doc = json.loads(json.dumps(WARPED))
    doc.update(potential="r", **{"lambda": 1.0, "m": "inf"})
    assert _load(doc).soliton.inv_m == 0.0
    doc["m"] = -2
    assert _load(doc).soliton.inv_m == -0.5


def test_resolve_catalog_and_overrides():
    spec = spf.resolve("fubini-study", count=7, seed=3)
    assert spec.count == 7 and spec.seed == 3 and spec.expect["half_flat"] == "self-dual"
    assert spf.resolve("cylinder-shrinker").wchart is not None
    with pytest.raises(SpecError):
        spf.resolve("not-a-catalog-entry")
