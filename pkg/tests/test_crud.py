import json

import numpy as np
import pandas as pd
import pytest

from ibclab.crud.reports import report_crud
from ibclab.crud.settings import setting_crud
from ibclab.exceptions import ConfigError
from ibclab.schemas.report import CheckRecord, VerificationReport
from ibclab.utils.random_settings import random_symmetric_relation


def test_setting_round_trip(seeded, tmp_path):
    relation = random_symmetric_relation(5, seeded.dH, drop=0)
    path = setting_crud.save(seeded, tmp_path / "setting.json", relations={"theta": relation})
    loaded, relations = setting_crud.load_with_relations(path)

    np.testing.assert_allclose(loaded.L.entries, seeded.L.entries)
    np.testing.assert_allclose(loaded.T.entries, seeded.T.entries)
    np.testing.assert_allclose(loaded.H.weights, seeded.H.weights)
    np.testing.assert_allclose(loaded.G0.entries, seeded.G0.entries, atol=1e-12)
    assert loaded.lambda0 == seeded.lambda0
    assert relations["theta"].equals(relation)


def test_missing_setting_file(tmp_path):
    with pytest.raises(ConfigError):
        setting_crud.load(tmp_path / "absent.json")


def test_setting_with_wrong_shape(one_dim, tmp_path):
    doc = setting_crud.to_document(one_dim).model_dump()
    doc["L"] = [[(1.0, 0.0), (2.0, 0.0)]]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        setting_crud.load(path)


def test_report_dump_is_canonical(tmp_path):
    report = VerificationReport(suite="demo", config={"seed": 3, "model": "random_setting"})
    report.checks.append(CheckRecord.from_residual("zeta", "anchor-z", 1e-13, 1e-10))
    report.checks.append(CheckRecord.from_flag("alpha", "anchor-a", False, detail="flag"))
    text = report_crud.dumps(report)
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["passed"] is False
    assert [c["name"] for c in data["checks"]] == ["zeta", "alpha"]

    path = report_crud.save_report(report, tmp_path / "out" / "report.json")
    assert report_crud.load_report(path) == report


def test_tables(tmp_path):
    path = report_crud.save_table([{"a": 1.0, "b": "x"}, {"a": 2.5, "b": "y"}], tmp_path / "rows.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["a", "b"]
    assert frame["a"].tolist() == [1.0, 2.5]


def test_spectrum_frame():
    real = report_crud.spectrum_frame(np.array([3.0, 1.0, 2.0]))
    assert real["eigenvalue"].tolist() == [1.0, 2.0, 3.0]
    complex_values = report_crud.spectrum_frame(np.array([1.0 + 1j, 1.0 - 1j]))
    assert list(complex_values.columns) == ["index", "re", "im"]
