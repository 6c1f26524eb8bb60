# pylint: disable=R0201, R0904, W0621
# R0201: Method could be a function
# R0904: Too many public methods
# W0621: Redefined outer name

"""
Tests for the text and packed-array importers.
"""
import json

import numpy as np
import pytest

from driftbench import FormatError, ParseError, RangeError, import_packed_arrays, import_text


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestImporters:
    """
    Tests for import_text and import_packed_arrays.
    """

    def test_import_text_csv(self, tmp_path):
        p = _write(tmp_path / "one.csv", 'month,label,family,features\n2019-01,1,famA,"3 7 2"\n')
        ds = import_text(p, dimension=10)
        assert len(ds) == 1
        s = ds[0]
        assert s.features.indices.tolist() == [2, 3, 7]
        assert s.label == 1
        assert s.month == 0
        assert s.family == 0
        assert ds.family_names == ("famA",)
        assert ds.name == "one"

    def test_import_text_regroups_months(self, tmp_path):
        p = _write(
            tmp_path / "two.csv",
            'month,label,family,features\n2019-02,0,,"1"\n2019-01,1,,"4 5"\n',
        )
        ds = import_text(p, dimension=10)
        assert ds.months == ("2019-01", "2019-02")
        assert [s.label for s in ds] == [1, 0]
        assert ds[0].family is None

    def test_import_text_numeric_families_keep_values(self, tmp_path):
        p = _write(
            tmp_path / "fam.csv",
            'month,label,family,features\n2019-01,1,7,"1"\n2019-01,1,3,"2"\n',
        )
        ds = import_text(p, dimension=10)
        assert ds.families.tolist() == [7, 3]
        assert ds.family_names == ()

    def test_import_text_infers_dimension(self, tmp_path):
        p = _write(tmp_path / "dim.csv", 'month,label,family,features\n2019-01,0,,"1 8"\n')
        assert import_text(p).dimension == 9

    def test_import_text_jsonl(self, tmp_path):
        lines = [
            {"month": "2019-03", "label": 1, "family": "famB", "features": [3, 7, 2]},
            {"month": "2019-01", "label": 0, "features": []},
        ]
        p = _write(tmp_path / "recs.jsonl", "\n".join(json.dumps(r) for r in lines) + "\n")
        ds = import_text(p, dimension=10)
        assert ds.months == ("2019-01", "2019-03")
        assert ds[1].features.indices.tolist() == [2, 3, 7]
        assert ds[1].family == 0

    def test_import_text_with_out_of_range_index(self, tmp_path):
        p = _write(tmp_path / "bad.csv", 'month,label,family,features\n2019-01,0,,"10"\n')
        with pytest.raises(RangeError) as err:
            import_text(p, dimension=10)
            pytest.fail("import_text() should fail.")
        assert "line 2: index 10 out of range [0, 10)." in str(err.value)

    def test_import_text_with_bad_month(self, tmp_path):
        p = _write(tmp_path / "bad.csv", 'month,label,family,features\n2019/01,0,,"1"\n')
        with pytest.raises(FormatError) as err:
            import_text(p, dimension=10)
            pytest.fail("import_text() should fail.")
        assert "line 2:" in str(err.value)

    @pytest.mark.parametrize(
        "text, msg",
        [
            ("month,label\n", "line 1: header should be month,label,family,features."),
            ('month,label,family,features\n2019-01,2,,"1"\n', "line 2: label should be 0 or 1"),
            ('month,label,family,features\n2019-01,0,famA,"1"\n', "line 2: family should be empty for benign samples."),
            ('month,label,family,features\n2019-01,0,,"1 x"\n', "line 2: features should be decimal indices."),
            ("month,label,family,features\n2019-01,0,\n", "line 2: expected 4 fields, got 3."),
        ],
    )
    def test_import_text_with_malformed_line(self, tmp_path, text, msg):
        p = _write(tmp_path / "bad.csv", text)
        with pytest.raises(ParseError) as err:
            import_text(p, dimension=10)
            pytest.fail("import_text() should fail.")
        assert msg in str(err.value)

    @pytest.mark.parametrize(
        "line, msg",
        [
            ("not json", "line 1: invalid JSON."),
            ("[1, 2]", "line 1: record should be object."),
            ('{"month": "2019-01", "label": 0}', "line 1: features not found."),
            ('{"month": "2019-01", "label": 0, "features": [], "x": 1}', "line 1: Unknown field: x."),
        ],
    )
    def test_import_text_jsonl_with_malformed_line(self, tmp_path, line, msg):
        p = _write(tmp_path / "bad.jsonl", line + "\n")
        with pytest.raises(ParseError) as err:
            import_text(p, dimension=10)
            pytest.fail("import_text() should fail.")
        assert msg in str(err.value)

    def test_import_packed_arrays_dense(self, tmp_path):
        p = tmp_path / "packed.npz"
        x = np.array([[0, 1, 0, 1], [1, 0, 0, 0], [0, 0, 1, 0]])
        np.savez(
            p,
            X=x,
            y=np.array([1, 0, 1]),
            month=np.array(["2019-02-15", "2019-01-03", "2019-01-20"]),
            family=np.array(["famA", "", "famB"]),
        )
        ds = import_packed_arrays(p)
        assert ds.dimension == 4
        assert ds.months == ("2019-01", "2019-02")
        assert [s.label for s in ds] == [0, 1, 1]
        assert ds[2].features.indices.tolist() == [1, 3]
        assert ds[0].family is None
        assert ds.family_names == ("famA", "famB")

    def test_import_packed_arrays_without_labels(self, tmp_path):
        p = tmp_path / "packed.npz"
        np.savez(p, X=np.zeros((1, 2)), month=np.array(["2019-01"]))
        with pytest.raises(FormatError) as err:
            import_packed_arrays(p)
            pytest.fail("import_packed_arrays() should fail.")
        assert "y not found in packed arrays." in str(err.value)
