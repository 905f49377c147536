"""Acceptance battery: every exit criterion at its stated tolerance.

Each test delegates to the corresponding criterion in resoforge.acceptance
(the same code path the CLI `report` subcommand runs), asserts the pass flag,
and prints the one-line pass/fail summary.
"""

import json

import pytest

from resoforge import acceptance


def _run(fn, **kwargs):
    result = fn(**kwargs)
    print()
    print(result.line())
    print("   ", json.dumps(result.details, default=str)[:240])
    assert result.passed, result.details
    return result


def test_criterion_01_generator_enumeration():
    result = _run(acceptance.criterion_1_generators)
    assert result.details["count_2_3"] == 8
    assert result.runtime < 1.0


def test_criterion_02_sl_completion():
    result = _run(acceptance.criterion_2_sl_completion)
    assert result.details["failures"] == 0
    assert result.runtime < 5.0


def test_criterion_03_morse_oracle():
    result = _run(acceptance.criterion_3_morse_oracle, instances=500)
    assert result.details["beta_2cos_error"] <= 1e-9
    assert result.details["failures"] == 0


def test_criterion_04_cosine_likeness():
    result = _run(acceptance.criterion_4_cosine_likeness)
    assert result.details["worst_gamma"] < 2.0 ** -40
    assert result.runtime < 10.0


def test_criterion_05_covering_exhaustiveness():
    result = _run(acceptance.criterion_5_covering, samples=10 ** 6)
    assert all(v == 0 for v in result.details["uncovered"].values())


def test_criterion_06_measure_scaling():
    result = _run(acceptance.criterion_6_measure_scaling, samples=10 ** 6)
    assert result.details["ratio"] == pytest.approx(4.0, rel=0.15)


def test_criterion_07_contraction_solver():
    result = _run(acceptance.criterion_7_contraction, instances=100)
    assert result.details["worst_contraction"] <= 1 / 8 + 1e-6
    assert result.details["worst_residual"] < 1e-13


def test_criterion_08_symplecticity():
    result = _run(acceptance.criterion_8_symplecticity, points=100)
    assert result.details["phi1_rational_residual"] == "0"
    for key in ("phi2", "phi3", "composite"):
        assert result.details[key] <= 1e-9
    assert result.details["group_law"] <= 1e-12


def test_criterion_09_energy_identity():
    result = _run(acceptance.criterion_9_energy_identity, points=100)
    assert result.details["relative_error"] <= 1e-10
    assert result.details["kinetic_split_residual"] == "0"


def test_criterion_10_averaging_structure():
    result = _run(acceptance.criterion_10_averaging)
    assert result.details["band_coeff_max"] == 0.0
    assert result.details["line_coeff_max"] == 0.0
    assert result.details["ratio_order1"] == pytest.approx(4.0, abs=0.8)
    assert result.details["ratio_order2"] == pytest.approx(8.0, abs=2.0)


def test_criterion_11_kappa_uniformity():
    result = _run(acceptance.criterion_11_kappa)
    assert result.details["distinct_kappas"] == 1
    assert result.details["hand_value_error"] <= 1e-9


def test_criterion_12_genericity_trend():
    result = _run(acceptance.criterion_12_genericity_trend, trials=2000)
    assert 2.0 <= result.details["ratio"] <= 8.0
