import numpy as np
import pytest

from sewcells.charts import (
    CellDefinition,
    Chart,
    ChartError,
    Constraint,
    PointSample,
    PointTensor,
    SamplingError,
    SlotKindError,
    TensorField,
    column_field,
    contract,
    fundamental_form,
    lower_index,
    raise_index,
    sample_points,
    sample_points_grouped,
    tensor_product,
    validate_cell,
    validate_structure,
)
from sewcells.geometry import h_tensor


class TestChart:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ChartError):
            Chart(("x", "x", "y"))

    def test_function_name_rejected(self):
        with pytest.raises(ChartError):
            Chart(("exp", "x", "y"))

    def test_adapted_index_bounds(self):
        with pytest.raises(ChartError):
            Chart(("x", "y"), adapted_index=5)

    def test_constraint_normalization(self):
        c = Constraint.from_source("z > 0", ("x", "y", "z"))
        assert c.source() == "z > 0"
        c2 = Constraint.from_source("x < 1", ("x", "y", "z"))
        assert c2.source() == "1.0 - x > 0"
        # canonical form is a fixed point of load -> serialize
        c3 = Constraint.from_source(c2.source(), ("x", "y", "z"))
        assert c3.source() == c2.source()


class TestSampling:
    def test_deterministic_for_fixed_seed(self):
        chart = Chart(("t", "x", "y"))
        assert sample_points(chart, 5, 42) == sample_points(chart, 5, 42)

    def test_constraints_are_satisfied(self):
        chart = Chart(("x", "y", "z"), (Constraint.from_source("z > 0", ("x", "y", "z")),))
        for sample in sample_points(chart, 100, 3):
            assert sample.coords[2] > 0

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            sample_points(Chart(("x",)), 0, 1)

    def test_thin_domain_fails_loudly(self):
        chart = Chart(("x",), (Constraint.from_source("x - 10 > 0", ("x",)),))
        with pytest.raises(SamplingError):
            sample_points(chart, 1, 0)

    def test_grouped_sampler_shares_adapted_values(self):
        chart = Chart(("t", "x", "y"), adapted_index=0)
        samples = sample_points_grouped(chart, 4, 3, 9)
        assert len(samples) == 12
        t_values = {s.coords[0] for s in samples}
        assert len(t_values) == 4
        for t in t_values:
            assert sum(1 for s in samples if s.coords[0] == t) == 3

    def test_grouped_sampler_needs_adapted_chart(self):
        with pytest.raises(ChartError):
            sample_points_grouped(Chart(("t", "x")), 3, 2, 0)


class TestValidation:
    def test_catalog_cells_pass(self, catalog_cells):
        for cell in catalog_cells:
            samples = sample_points(cell.chart, 50, 13)
            report = validate_cell(cell, samples, 1e-9)
            assert report.passed, report.format_table()

    def test_flat_cell_residuals_are_round_off(self, flat_cell):
        report = validate_cell(flat_cell, sample_points(flat_cell.chart, 10, 1), 1e-9)
        for check in report.checks:
            assert check.residual <= 1e-15

    def test_model_cell_passes_at_tight_tolerance(self, model_cell):
        report = validate_cell(model_cell, sample_points(model_cell.chart, 25, 1), 1e-12)
        assert report.passed, report.format_table()

    def test_sign_flipped_phi_fails_validation(self, model_cell):
        chart = model_cell.chart
        broken = CellDefinition(
            name="broken",
            chart=chart,
            metric=model_cell.metric,
            # phi with the sign of one component flipped; the quadratic
            # compatibility condition cannot see a single sign, but phi^2 does
            phi=TensorField.build(chart, 1, 1, [["0", "0", "0"], ["0", "0", "exp(-2*t)"], ["0", "exp(2*t)", "0"]]),
            xi=model_cell.xi,
            eta=model_cell.eta,
        )
        report = validate_structure(broken, sample_points(chart, 10, 2), 1e-9)
        assert not report.passed
        assert report.check("phi_square_identity").residual >= 0.1

    def test_adapted_eta_components_are_exact(self, catalog_cells):
        for cell in catalog_cells:
            t = cell.chart.adapted_index
            for sample in sample_points(cell.chart, 10, 4):
                eta = cell.eta.evaluate(sample.array())
                expected = np.zeros(3)
                expected[t] = 1.0
                assert np.array_equal(eta, expected)


class TestFundamentalForm:
    def test_flat_cell_components(self, flat_cell):
        phi_form = fundamental_form(flat_cell, np.zeros(3))
        # with Phi_ij = g_ik phi^k_j and phi(e_x) = e_y this gives Phi_yx = +1
        expected = np.zeros((3, 3))
        expected[2, 1] = 1.0
        expected[1, 2] = -1.0
        assert np.array_equal(phi_form, expected)

    def test_model_cell_at_interior_point(self, model_cell):
        phi_form = fundamental_form(model_cell, np.array([0.3, 0.1, -0.2]))
        assert phi_form[0, 1] == phi_form[0, 2] == 0.0  # no dt components
        assert phi_form[2, 1] == pytest.approx(1.0, abs=1e-15)
        assert phi_form[1, 2] == pytest.approx(-1.0, abs=1e-15)

    def test_antisymmetry_and_reeb_annihilation(self, catalog_cells):
        for cell in catalog_cells:
            for sample in sample_points(cell.chart, 20, 5):
                point = sample.array()
                phi_form = fundamental_form(cell, point)
                assert float(np.max(np.abs(phi_form + phi_form.T))) <= 1e-12
                xi = cell.xi.evaluate(point)
                assert float(np.max(np.abs(xi @ phi_form))) <= 1e-12


class TestIndexOperations:
    def test_lower_raise_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            a = rng.normal(size=(4, 4))
            g = a @ a.T + 4.0 * np.eye(4)
            vec = PointTensor(rng.normal(size=4), ("u",))
            back = raise_index(lower_index(vec, 0, g), 0, np.linalg.inv(g))
            assert float(np.max(np.abs(back.values - vec.values))) <= 1e-12

    def test_contract_phi_phi_gives_phi_squared(self, flat_cell):
        point = np.zeros(3)
        phi = PointTensor(flat_cell.phi.evaluate(point), ("u", "l"))
        # phi^i_m phi^m_j: contract the upper slot of the second factor
        product = tensor_product(phi, phi)
        squared = contract(product, 2, 1)
        xi = flat_cell.xi.evaluate(point)
        eta = flat_cell.eta.evaluate(point)
        expected = -np.eye(3) + np.outer(xi, eta)
        assert np.array_equal(squared.values, expected)

    def test_slot_kind_mismatch(self):
        vec = PointTensor(np.ones(3), ("u",))
        with pytest.raises(SlotKindError):
            raise_index(vec, 0, np.eye(3))
        with pytest.raises(SlotKindError):
            contract(tensor_product(vec, vec), 0, 1)

    def test_h_is_trace_free_on_model_cell(self, model_cell):
        for sample in sample_points(model_cell.chart, 10, 6):
            h = h_tensor(model_cell, sample.array()).h
            assert abs(float(np.trace(h))) <= 1e-12


class TestTensorField:
    def test_shape_validation(self):
        chart = Chart(("x", "y"))
        with pytest.raises(ChartError):
            TensorField.build(chart, 0, 2, [["1", "0"], ["0"]])

    def test_unknown_coordinate_rejected(self):
        chart = Chart(("x", "y"))
        with pytest.raises(Exception):
            TensorField.build(chart, 1, 0, ["z", "0"])

    def test_column_field(self, model_cell):
        col = column_field(model_cell.phi, 1)
        point = np.array([0.2, 0.0, 0.0])
        assert np.array_equal(col.evaluate(point), model_cell.phi.evaluate(point)[:, 1])

    def test_point_sample_array(self):
        s = PointSample((1.0, 2.0), seed=3, draw=4)
        assert np.array_equal(s.array(), [1.0, 2.0])
