import json

import pytest

from sewcells.charts import sample_points, validate_structure
from sewcells.manifold_io import (
    ManifoldFileError,
    dumps,
    file_digest,
    load_manifold,
    save_manifold,
    structure_to_dict,
)
from sewcells.sewing import SewnManifold, sew


def _roundtrip(cell, tmp_path, name="cell.json"):
    path = tmp_path / name
    save_manifold(cell, path)
    return path, load_manifold(path)


class TestRoundTrip:
    def test_catalog_cells_round_trip_structurally(self, catalog_cells, tmp_path):
        for i, cell in enumerate(catalog_cells):
            path, loaded = _roundtrip(cell, tmp_path, f"cell{i}.json")
            assert loaded.name == cell.name
            assert loaded.chart == cell.chart
            assert loaded.metric.components == cell.metric.components
            assert loaded.phi.components == cell.phi.components
            assert loaded.xi.components == cell.xi.components
            assert loaded.eta.components == cell.eta.components
            # a second dump is byte-identical
            assert dumps(loaded) == path.read_text(encoding="utf-8")

    def test_sewn_manifold_round_trips_with_provenance(self, model_cell, tmp_path):
        sewn = sew([model_cell, model_cell])
        path, loaded = _roundtrip(sewn, tmp_path, "sewn.json")
        assert isinstance(loaded, SewnManifold)
        assert loaded.cell_count == 2
        assert loaded.eta_scale == sewn.eta_scale
        # identical residual tables after reload
        samples = sample_points(sewn.chart, 10, 7)
        before = validate_structure(sewn, samples, 1e-9)
        after = validate_structure(loaded, samples, 1e-9)
        for b, a in zip(before.checks, after.checks):
            assert a.residual == b.residual

    def test_digest_is_stable(self, flat_cell, tmp_path):
        path, _ = _roundtrip(flat_cell, tmp_path)
        assert file_digest(path) == file_digest(path)


class TestLoaderErrors:
    def _doc(self, flat_cell):
        return structure_to_dict(flat_cell)

    def _write(self, tmp_path, doc):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    def test_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json", encoding="utf-8")
        with pytest.raises(ManifoldFileError):
            load_manifold(path)

    def test_rejects_asymmetric_metric_naming_entries(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["metric"][0][1] = "x"
        doc["metric"][1][0] = "y"
        with pytest.raises(ManifoldFileError) as err:
            load_manifold(self._write(tmp_path, doc))
        assert "metric[0][1]" in str(err.value) and "metric[1][0]" in str(err.value)

    def test_upper_triangle_may_be_null(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["metric"][0][1] = None
        doc["metric"][0][2] = None
        doc["metric"][1][2] = None
        loaded = load_manifold(self._write(tmp_path, doc))
        assert loaded.metric.components == flat_cell.metric.components

    def test_lower_triangle_is_required(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["metric"][1][0] = None
        with pytest.raises(ManifoldFileError) as err:
            load_manifold(self._write(tmp_path, doc))
        assert "lower triangle" in str(err.value)

    def test_rejects_unknown_coordinate_in_expression(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["xi"][0] = "q + 1"
        with pytest.raises(ManifoldFileError) as err:
            load_manifold(self._write(tmp_path, doc))
        assert "xi[0]" in str(err.value)

    def test_rejects_undeclared_adapted_coordinate(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["adapted_coordinate"] = "w"
        with pytest.raises(ManifoldFileError):
            load_manifold(self._write(tmp_path, doc))

    def test_rejects_missing_keys(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        del doc["phi"]
        with pytest.raises(ManifoldFileError):
            load_manifold(self._write(tmp_path, doc))

    def test_rejects_wrong_shape(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["eta"] = ["1", "0"]
        with pytest.raises(ManifoldFileError):
            load_manifold(self._write(tmp_path, doc))

    def test_rejects_unknown_format_tag(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["format"] = "something-else/9"
        with pytest.raises(ManifoldFileError):
            load_manifold(self._write(tmp_path, doc))

    def test_malformed_expression_reports_location(self, flat_cell, tmp_path):
        doc = self._doc(flat_cell)
        doc["phi"][1][2] = "1 +"
        with pytest.raises(ManifoldFileError) as err:
            load_manifold(self._write(tmp_path, doc))
        assert "phi[1][2]" in str(err.value)
