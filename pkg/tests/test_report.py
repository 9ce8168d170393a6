import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from smallcap.report import (CSV_COLUMNS, SCHEMA_VERSION, AuditReport, emit, growth_exponent,
                             reports_from_csv, reports_from_json, reports_to_csv, reports_to_json,
                             skip_record)


def sample():
    return AuditReport("superlevel", {"N": np.int64(8), "alpha": np.float64(2.0), "ok": np.bool_(True),
                                      "list": np.arange(3)},
                       measured=1.5, bound=3.0, fitted_constant=0.5, growth_exponent=float("nan"),
                       passed=True, runtime=12.0)


def test_empty_csv_has_header():
    lines = reports_to_csv([]).splitlines()
    assert lines == [f"# schema_version={SCHEMA_VERSION}", ",".join(f'"{c}"' for c in CSV_COLUMNS)]
    assert reports_from_csv(reports_to_csv([])) == []


def test_json_round_trip_and_schema():
    text = reports_to_json([sample()])
    assert f'"schema_version": "{SCHEMA_VERSION}"' in text
    assert "runtime" not in text
    (r,) = reports_from_json(text)
    assert r.name == "superlevel" and r.parameters == {"N": 8, "alpha": 2.0, "ok": True, "list": [0, 1, 2]}
    assert r.measured == 1.5 and math.isnan(r.growth_exponent) and r.passed


def test_csv_round_trip():
    (r,) = reports_from_csv(reports_to_csv([sample()]))
    assert r.parameters["N"] == 8 and r.fitted_constant == 0.5 and r.passed


@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False),
       st.booleans(), st.text(st.characters(blacklist_characters="\x00"), max_size=10))
def test_round_trip_property(m, b, passed, name):
    rep = AuditReport(name, {"k": m}, measured=m, bound=b, passed=passed)
    for back in (reports_from_json(reports_to_json([rep]))[0], reports_from_csv(reports_to_csv([rep]))[0]):
        assert back.name == name and back.measured == m and back.bound == b and back.passed == passed


def test_emit_deterministic(tmp_path):
    a = emit([sample(), skip_record("x", {"N": 1}, "too big")], tmp_path / "a")
    b = emit([sample(), skip_record("x", {"N": 1}, "too big")], tmp_path / "b")
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()


def test_growth_exponent():
    assert math.isclose(growth_exponent([8, 16, 32], [1, 2, 4]), 1.0)
    assert math.isclose(growth_exponent([8, 16], [3, 3]), 0.0, abs_tol=1e-12)
    assert math.isnan(growth_exponent([8], [1]))


def test_skip_record():
    r = skip_record("superlevel", {"N": 4096}, "grid needs 9 GiB")
    assert r.skipped and r.passed
