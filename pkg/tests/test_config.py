"""Tests for configuration loading and the closed-form library."""

import textwrap

import numpy as np
import pytest

from varexp_splus import closed_forms
from varexp_splus.config import COMMANDS, SAMPLE_CONFIGS, ExperimentConfig, load_config, parse_config
from varexp_splus.errors import ConfigError, UnknownLabelError
from varexp_splus.exponent_field import ExponentKind
from varexp_splus.operator_kernel import DensityLoad, PointLoad

# =============================================================================
# Fixtures
# =============================================================================


@pytest.fixture
def converge_text():
    return textwrap.dedent(
        """\
        command: converge
        seed: 3
        exponent: {kind: affine, intercept: 2.0, slope: 1.0}
        kernel:
          label: perturbed-p(z)-laplacian
        rhs: {name: constant, parameters: {value: 2.0}}
        mesh: {levels: 4, reference_level: 6}
        output: out/converge
        """
    )


# =============================================================================
# Parsing Tests
# =============================================================================


class TestParseConfig:
    """Valid configurations and their defaults."""

    def test_full_config(self, converge_text):
        config = parse_config(converge_text)
        assert config.command == "converge"
        assert config.seed == 3
        assert config.kernel.label == "perturbed-p(z)-laplacian"
        assert config.mesh.levels == 4
        assert config.mesh.reference_level == 6
        assert str(config.output) == "out/converge"
        assert config.exact is None
        p = config.exponent.build(config.domain.build())
        assert p.kind is ExponentKind.AFFINE
        assert p.p_plus == pytest.approx(3.0)

    def test_defaults(self):
        config = parse_config("command: norm\n")
        assert config.seed == 0
        assert config.exponent.kind == "constant"
        assert config.kernel.samples == 10_000
        assert config.tolerances.newton == 1e-10
        assert config.tolerances.max_halvings == 30
        assert config.probe.frequencies == (4, 8, 16, 32)

    @pytest.mark.parametrize("command", COMMANDS)
    def test_sample_configs_parse(self, command):
        assert parse_config(SAMPLE_CONFIGS[command]).command == command

    def test_with_overrides(self, converge_text):
        config = parse_config(converge_text).with_overrides(seed=9, output="elsewhere")
        assert config.seed == 9
        assert str(config.output) == "elsewhere"
        unchanged = parse_config(converge_text)
        assert unchanged.with_overrides() is unchanged

    def test_to_dict_round_trips_through_parser(self, converge_text):
        import yaml

        data = parse_config(converge_text).to_dict()
        again = parse_config(yaml.safe_dump(data))
        assert again.to_dict() == data

    def test_tabulated_exponent(self):
        config = parse_config(
            "command: norm\nexponent: {kind: tabulated, grid: [0.0, 0.5, 1.0], values: [2.0, 3.0, 2.5]}\n"
        )
        p = config.exponent.build(config.domain.build())
        assert p.p_plus == 3.0

    def test_nested_exponent_parameters(self):
        config = parse_config(
            "command: norm\nexponent:\n  kind: affine\n  parameters: {intercept: 2.0, slope: 1.0}\n"
        )
        assert config.exponent.parameters == {"intercept": 2.0, "slope": 1.0}
        assert config.to_dict()["exponent"] == {
            "kind": "affine",
            "parameters": {"intercept": 2.0, "slope": 1.0},
        }

    def test_nested_and_flat_exponents_agree(self):
        nested = parse_config("command: norm\nexponent: {kind: constant, parameters: {value: 3}}\n")
        flat = parse_config("command: norm\nexponent: {kind: constant, value: 3}\n")
        assert nested.exponent == flat.exponent

    def test_pairing_tolerance(self):
        config = parse_config("command: converge\ntolerances: {pairing: 2.5e-5}\n")
        assert config.tolerances.pairing == 2.5e-5
        assert parse_config("command: converge\n").tolerances.pairing == 1e-5

    def test_solver_settings(self, converge_text):
        settings = parse_config(converge_text).tolerances.solver_settings()
        assert settings.tolerance == 1e-10
        assert settings.max_iterations == 100


class TestConfigErrors:
    """Invalid configurations report the offending line."""

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: norm\nseed: 1\ncolour: blue\n", path="bad.yaml")
        assert info.value.line == 3
        assert info.value.diagnostic() == "bad.yaml:3: unknown key 'colour'"

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: solve\nmesh:\n  levels: 3\n  depth: 2\n")
        assert info.value.line == 4
        assert "mesh.depth" in info.value.message

    def test_unknown_kernel(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: check-kernel\nkernel:\n  label: heat\n")
        assert info.value.line == 3
        assert "unknown kernel 'heat'" in info.value.message

    def test_unknown_density(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: solve\nrhs: {name: gaussian}\n")
        assert info.value.line == 2
        assert "unknown rhs 'gaussian'" in info.value.message

    def test_unknown_command(self):
        with pytest.raises(ConfigError, match="command must be one of"):
            parse_config("command: plot\n")

    def test_invalid_exponent(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: norm\nseed: 0\nexponent: {kind: constant, value: 0.5}\n")
        assert info.value.line == 3
        assert "invalid exponent" in info.value.message

    def test_missing_exponent_parameter(self):
        with pytest.raises(ConfigError, match="needs parameter"):
            parse_config("command: norm\nexponent: {kind: affine, intercept: 2.0}\n")

    @pytest.mark.parametrize(
        ("text", "line", "key"),
        [
            ("command: norm\ndomain: {left: abc}\n", 2, "domain.left"),
            ("command: solve\nmesh:\n  levels: six\n", 3, "mesh.levels"),
            ("command: converge\ntolerances:\n  newton: tight\n", 3, "tolerances.newton"),
            ("command: norm\nseed: [1, 2]\n", 2, "seed"),
            ("command: check-kernel\nkernel:\n  samples: many\n", 3, "kernel.samples"),
            ("command: norm\nmesh:\n  quadrature: five\n", 3, "mesh.quadrature"),
            (
                "command: norm\nexponent:\n  kind: affine\n  parameters: {intercept: two, slope: 1}\n",
                4,
                "exponent.parameters.intercept",
            ),
        ],
    )
    def test_non_numeric_values_report_line(self, text, line, key):
        with pytest.raises(ConfigError) as info:
            parse_config(text, path="bad.yaml")
        assert info.value.line == line
        assert key in info.value.message
        assert info.value.diagnostic().startswith(f"bad.yaml:{line}: ")

    def test_bad_rhs_parameters_report_line(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: solve\nrhs:\n  name: constant\n  parameters: {value: abc}\n")
        assert info.value.line == 4
        assert "invalid rhs 'constant'" in info.value.message

    def test_unknown_exact_parameter_reports_line(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: converge\nexact:\n  name: parabola\n  parameters: {width: 2}\n")
        assert info.value.line == 4

    def test_point_load_outside_domain(self):
        with pytest.raises(ConfigError) as info:
            parse_config(
                "command: solve\nrhs:\n  name: point\n  parameters: {location: 1.5}\n"
            )
        assert info.value.line == 4
        assert "outside" in info.value.message

    def test_extra_key_beside_exponent_parameters(self):
        with pytest.raises(ConfigError) as info:
            parse_config("command: norm\nexponent:\n  kind: constant\n  parameters: {value: 2}\n  value: 3\n")
        assert info.value.line == 5

    def test_invalid_domain(self):
        with pytest.raises(ConfigError, match="invalid domain"):
            parse_config("command: norm\ndomain: {left: 1.0, right: 0.0}\n")

    def test_unknown_probe_sequence(self):
        with pytest.raises(ConfigError, match="probe.sequence"):
            parse_config("command: splus-probe\nprobe: {sequence: random}\n")

    def test_invalid_yaml(self):
        with pytest.raises(ConfigError, match="invalid YAML"):
            parse_config("command: [norm\n")

    def test_not_a_mapping(self):
        with pytest.raises(ConfigError, match="mapping"):
            parse_config("- norm\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")

    def test_load_from_file(self, tmp_path, converge_text):
        path = tmp_path / "converge.yaml"
        path.write_text(converge_text)
        config = load_config(path)
        assert isinstance(config, ExperimentConfig)
        assert config.source == path


# =============================================================================
# Closed-Form Library Tests
# =============================================================================


class TestClosedForms:
    """Named functions and loads."""

    def test_parabola_and_derivative(self):
        f = closed_forms.function("parabola", {"scale": 2.0})
        z = np.array([0.0, 0.25, 0.5])
        np.testing.assert_allclose(f(z), [0.0, 0.375, 0.5])
        np.testing.assert_allclose(f.derivative(z), [2.0, 1.0, 0.0])

    def test_manufactured_density_for_p_four(self):
        f = closed_forms.density("manufactured-parabola", {"exponent": 4.0})
        z = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(f(z), 6.0 * (1.0 - 2.0 * z) ** 2)

    def test_manufactured_density_for_p_two_is_constant(self):
        f = closed_forms.density("manufactured-parabola", {"exponent": 2.0})
        np.testing.assert_allclose(f(np.linspace(0.0, 1.0, 5)), 2.0)

    def test_manufactured_density_rejects_small_exponent(self):
        with pytest.raises(ValueError):
            closed_forms.density("manufactured-parabola", {"exponent": 1.5})

    def test_point_load(self):
        rhs = closed_forms.right_hand_side("point", {"location": 0.25, "magnitude": 3.0})
        assert rhs == PointLoad(location=0.25, magnitude=3.0)

    def test_point_load_rejects_unknown_parameters(self):
        with pytest.raises(ValueError, match="point-load"):
            closed_forms.right_hand_side("point", {"width": 0.1})

    def test_density_load(self):
        assert isinstance(closed_forms.right_hand_side("sine"), DensityLoad)

    def test_unknown_name(self):
        with pytest.raises(UnknownLabelError):
            closed_forms.function("gaussian")

    def test_bad_parameters(self):
        with pytest.raises(ValueError, match="bad parameters"):
            closed_forms.function("parabola", {"width": 1.0})

    def test_names(self):
        assert "point" in closed_forms.density_names()
        assert "point" not in closed_forms.function_names()
        assert "parabola" in closed_forms.function_names()
