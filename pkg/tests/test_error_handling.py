"""
Error Handling Tests

Tests for scenario and input error handling including:
- Schema validation errors with locations and line numbers
- Unknown keys and malformed TOML
- Formula and predicate errors raised while building a scenario
- Error documents and exit codes
"""

import pytest

from ristl.errors import (
    BarrierError,
    DistributionError,
    FormulaSyntaxError,
    RistlError,
    ScenarioError,
    TraceError,
)
from ristl.scenario import load_scenario
from ristl.utils import read_trace_table
from tests.test_base import ScenarioTestMixin

BASE = """
name = "errors"

[gaussian]
mean = [0.0]
diagonal = [1.0]

[[predicate]]
id = "mu"
family = "affine"
v = [-1.0]
w = [1.0]
b0 = 0.0
risk = "chance"
delta = 0.9

[formula]
text = "mu"

[domain]
lower = [-10.0]
upper = [10.0]
"""


def _line(text: str, needle: str) -> int:
    for number, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(needle):
            return number
    raise AssertionError(f"{needle!r} not in text")


class TestScenarioValidation(ScenarioTestMixin):
    """Test schema errors in scenario files."""

    def _load(self, tmp_path, text):
        return load_scenario(self._write_scenario(tmp_path, text))

    def test_valid_base(self, tmp_path):
        """Test that the base document loads."""
        scenario = self._load(tmp_path, BASE)
        assert scenario.name == "errors"
        assert scenario.subtasks == ()

    def test_unknown_key(self, tmp_path):
        """Test that an unknown key is rejected with its location and line."""
        text = BASE + "\n[controller]\nlaw = \"slack\"\nbogus = 1\n"
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        detail = exc.value.detail
        assert detail["location"] == "controller.bogus"
        assert detail["line"] == _line(text, "bogus")
        assert exc.value.code == "scenario"

    def test_probability_out_of_range(self, tmp_path):
        """Test that delta must lie in (0, 1)."""
        text = BASE.replace("delta = 0.9", "delta = 1.5")
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert exc.value.detail["location"] == "predicate.0.delta"
        assert exc.value.detail["line"] == _line(text, "delta")

    def test_missing_risk_parameter(self, tmp_path):
        """Test that a CVaR predicate needs beta."""
        text = BASE.replace('risk = "chance"\ndelta = 0.9', 'risk = "cvar"\ngamma = 1.5')
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert "beta" in exc.value.message

    def test_covariance_and_diagonal(self, tmp_path):
        """Test that exactly one covariance form is accepted."""
        text = BASE.replace("diagonal = [1.0]", "diagonal = [1.0]\ncovariance = [[1.0]]")
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert exc.value.detail["location"] == "gaussian"

    def test_domain_order(self, tmp_path):
        """Test that the domain needs lower < upper."""
        text = BASE.replace("lower = [-10.0]", "lower = [20.0]")
        with pytest.raises(ScenarioError):
            self._load(tmp_path, text)

    def test_invalid_toml(self, tmp_path):
        """Test that a TOML syntax error reports the line."""
        text = BASE.replace('name = "errors"', 'name = "errors')
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert "invalid TOML" in exc.value.message
        assert f"line {_line(text, 'name')}" in exc.value.message

    def test_duplicate_predicate_ids(self, tmp_path):
        """Test that predicate ids must be unique."""
        block = BASE[BASE.index("[[predicate]]"):BASE.index("[formula]")]
        text = BASE.replace("[formula]", block + "[formula]")
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert "unique" in exc.value.message

    def test_decreasing_deadlines(self, tmp_path):
        """Test that subtask deadlines must increase."""
        text = self._reach_scenario_text(hold_only=True, deadline=3.0)
        text += "\n[[subtask]]\ninvariant = [\"corridor\"]\nreach = []\ndeadline = 2.0\n"
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert "strictly increasing" in exc.value.message

    def test_deadline_after_t_end(self, tmp_path):
        """Test that the last deadline may not exceed integrator.t_end."""
        text = self._reach_scenario_text(hold_only=True, deadline=3.0).replace("dt = 0.01", "dt = 0.01\nt_end = 2.5")
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert "t_end" in exc.value.message

    def test_subtask_unknown_predicate(self, tmp_path):
        """Test that subtasks may only name declared predicates."""
        text = self._reach_scenario_text(hold_only=True).replace('invariant = ["corridor"]', 'invariant = ["wall"]')
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert "wall" in exc.value.message


class TestScenarioBuild(ScenarioTestMixin):
    """Test errors raised while building runtime objects."""

    def _load(self, tmp_path, text):
        return load_scenario(self._write_scenario(tmp_path, text))

    def test_formula_syntax(self, tmp_path):
        """Test that formula errors are wrapped with their cause."""
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, BASE.replace('text = "mu"', 'text = "G[0,1](mu"'))
        assert exc.value.detail["cause"] == "formula_syntax"

    def test_formula_unknown_predicate(self, tmp_path):
        """Test that the formula may only use declared predicates."""
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, BASE.replace('text = "mu"', 'text = "mu & nu"'))
        assert exc.value.detail["cause"] == "unknown_predicate"

    def test_environment_size_mismatch(self, tmp_path):
        """Test that w must match the environment dimension."""
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, BASE.replace("w = [1.0]", "w = [1.0, 0.0]"))
        assert exc.value.detail["location"] == "predicate.mu.w"

    def test_state_size_mismatch(self, tmp_path):
        """Test that v must match the domain dimension."""
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, BASE.replace("v = [-1.0]", "v = [-1.0, 0.0]"))
        assert exc.value.detail["location"] == "predicate.mu.v"

    def test_indefinite_covariance(self, tmp_path):
        """Test that a non-PSD covariance is reported as a distribution error."""
        text = BASE.replace("mean = [0.0]\ndiagonal = [1.0]", "mean = [0.0]\ncovariance = [[-1.0]]")
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert exc.value.detail["cause"] == "distribution"

    def test_selector_out_of_range(self, tmp_path):
        """Test that a norm-ball selector must index the environment."""
        text = self._reach_scenario_text().replace("selector = [0, 1]", "selector = [1, 2]")
        with pytest.raises(ScenarioError) as exc:
            self._load(tmp_path, text)
        assert exc.value.detail["cause"] == "distribution"


class TestErrorDocuments:
    """Test the structured error payloads."""

    def test_default_help(self):
        """Test that every error carries a help text."""
        error = BarrierError("no barrier")
        assert error.to_dict() == {"error": "barrier", "message": "no barrier", "help": BarrierError.default_help}

    def test_context_fields(self):
        """Test that context values are kept and None values dropped."""
        error = DistributionError("bad", help="fix it", predicate="mu", line=None)
        assert error.detail == {"error": "distribution", "message": "bad", "help": "fix it", "predicate": "mu"}

    def test_formula_position(self):
        """Test that syntax errors carry their position."""
        error = FormulaSyntaxError("unexpected token", 4)
        assert error.position == 4
        assert "position 4" in error.message
        assert isinstance(error, RistlError)

    def test_trace_without_columns(self, tmp_path):
        """Test that verification needs a full simulator trace."""
        path = tmp_path / "partial.csv"
        path.write_text("t,x1,x2\n0,0,0\n", encoding="utf-8")
        with pytest.raises(TraceError):
            read_trace_table(path)
