"""
Tests for the command-line front end and its exit codes.
"""
import json

import pytest

from steep.cli import (
    EXIT_DEGENERATE_GRADIENT,
    EXIT_INCONCLUSIVE,
    EXIT_NOT_CERTIFIED,
    EXIT_OK,
    EXIT_USAGE,
    cmd_check,
    cmd_degeneracy,
    cmd_examples,
    cmd_generate,
    cmd_table,
    main,
)
from steep.catalog import FOUR_VARIABLE


def test_table_output(capsys):
    assert cmd_table(['--n', '5', '--r', '5']) == EXIT_OK
    out = capsys.readouterr().out
    assert "n=5 r=5" in out
    assert "codimension bound: 0" in out
    assert "uninformative" not in out


def test_table_flags_high_dimension(capsys, tmp_path):
    path = tmp_path / "table.json"
    assert cmd_table(['--n', '6', '--r', '5', '--json', str(path)]) == EXIT_OK
    assert "conditions uninformative: beta_1 <= 3" in capsys.readouterr().out
    document = json.loads(path.read_text())
    assert document['beta'][0] == 3


def test_generate_text_and_json(capsys):
    assert cmd_generate(['--n', '3', '--m', '2']) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("# n=3 r=5 m=2 beta=4 equations=6")

    assert cmd_generate(['--n', '2', '--m', '1', '--format', 'json']) == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert len(document['equations']) == 4


def test_generate_rejects_invalid_m(capsys):
    assert cmd_generate(['--n', '3', '--m', '5']) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_check_steep_function_writes_report(capsys, tmp_path):
    path = tmp_path / "report.json"
    code = cmd_check(['--n', '2', '--poly', 'I1 + I2^2', '--json', str(path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "verdict: steep_certified" in out
    assert "Sufficient conditions only" in out

    document = json.loads(path.read_text())
    assert document['verdict'] == 'steep_certified'
    assert document['disclaimer'].startswith("Sufficient conditions only")

    again = tmp_path / "again.json"
    assert cmd_check(['--n', '2', '--poly', 'I1 + I2^2', '--json', str(again)]) == EXIT_OK
    second = json.loads(again.read_text())
    document.pop('generated_at')
    second.pop('generated_at')
    assert document == second


def test_check_degenerate_gradient(capsys):
    assert cmd_check(['--n', '2', '--poly', 'I1^2']) == EXIT_DEGENERATE_GRADIENT
    assert "degenerate_gradient" in capsys.readouterr().out


def test_check_polynomial_file(tmp_path):
    path = tmp_path / "h.txt"
    path.write_text("I1 + I2^2\n")
    assert cmd_check(['--n', '2', '--poly-file', str(path)]) == EXIT_OK


def test_check_at_shifted_point():
    assert cmd_check(['--n', '2', '--poly', 'I1 + (I2 - 1)^2', '--point', '0,1']) == EXIT_OK


@pytest.mark.parametrize('argv', [
    ['--n', '6', '--poly', 'I1 + I2^2'],
    ['--n', '2', '--poly', 'I1 +'],
    ['--n', '2'],
    ['--n', '2', '--poly', 'I1', '--poly-file', 'h.txt'],
    ['--n', '2', '--poly', 'I1 + I3'],
    ['--n', '2', '--poly', 'I1', '--point', '0,0,0'],
])
def test_check_usage_errors(argv, capsys):
    assert cmd_check(argv) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_high_dimension_message(capsys):
    cmd_check(['--n', '6', '--poly', 'I1'])
    assert "n >= 6" in capsys.readouterr().err


def test_missing_subcommand_and_flags():
    assert main([]) == EXIT_USAGE
    assert main(['degeneracy', '--n', '4', '--poly', 'I1']) == EXIT_USAGE
    assert cmd_degeneracy(['--n', '4', '--poly', 'I4', '--order', '9']) == EXIT_USAGE


def test_degeneracy_reports_witness(capsys):
    code = cmd_degeneracy(['--n', '4', '--poly', FOUR_VARIABLE.text, '--order', '3',
                           '--mode', 'heuristic', '--seeds', '32'])
    assert code == EXIT_NOT_CERTIFIED
    out = capsys.readouterr().out
    assert out.startswith("3-jet: degenerate")
    assert out.count("witness (") == 1


def test_degeneracy_from_jet_file(tmp_path, example1_jet, capsys):
    path = tmp_path / "jet.json"
    path.write_text(json.dumps(example1_jet.to_dict()))
    assert cmd_degeneracy(['--jet-file', str(path), '--order', '5']) == EXIT_OK
    assert capsys.readouterr().out.startswith("5-jet: non_degenerate")


def test_degeneracy_undecided_in_heuristic_mode(tmp_path, example1_jet, capsys):
    path = tmp_path / "jet.json"
    path.write_text(json.dumps(example1_jet.to_dict()))
    code = cmd_degeneracy(['--jet-file', str(path), '--order', '5', '--mode', 'heuristic',
                           '--seeds', '8'])
    assert code == EXIT_INCONCLUSIVE
    assert capsys.readouterr().out.startswith("5-jet: unknown")


@pytest.mark.parametrize('case', ['tables', 'golden'])
def test_examples_single_case(case, capsys):
    assert cmd_examples(['--only', case]) == EXIT_OK
    out = capsys.readouterr().out
    assert f"PASS  {case}" in out
    assert "non-default configuration" not in out


def test_examples_echo_non_default_settings(capsys):
    assert cmd_examples(['--only', 'tables', '--tol', '1e-1']) == EXIT_OK
    out = capsys.readouterr().out
    assert "non-default configuration: {'witness_tol': 0.1}" in out


def test_examples_unknown_case():
    assert cmd_examples(['--only', 'example9']) == EXIT_USAGE


def test_examples_samples_default_from_config(tmp_path, capsys):
    path = tmp_path / "config.yaml"
    path.write_text("examples:\n  elimination_samples: 20\n")
    assert cmd_examples(['--only', 'elimination', '--config', str(path)]) == EXIT_OK
    assert capsys.readouterr().out.count("/20") == 6

    assert cmd_examples(['--only', 'elimination', '--config', str(path),
                         '--samples', '10']) == EXIT_OK
    assert capsys.readouterr().out.count("/10") == 6


def test_examples_rejects_non_positive_samples(capsys):
    assert cmd_examples(['--only', 'elimination', '--samples', '0']) == EXIT_USAGE
    assert "--samples must be positive" in capsys.readouterr().err
