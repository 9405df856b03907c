"""Release gate: each criterion runs at its stated tolerance and prints one
pass/fail line. Criteria are property-based; paper-scale table numbers are
documentation, not gates."""

import json

import pytest

from tsnas import suites


def _report(name, rep):
    status = "PASS" if rep.passed else "FAIL"
    print(f"[{status}] {name}: {json.dumps(rep.details, default=str)[:400]} ({rep.seconds:.1f}s)")
    return rep


def test_acceptance_1_gradient_correctness():
    rep = _report("1 gradient correctness (rel err <= 1e-4, 20 instances/kind)",
                  suites.run_gradient_suite(instances_per_kind=20, rtol=1e-4))
    assert rep.passed, rep.details
    assert rep.seconds < 300


def test_acceptance_2_discretization_equivalence():
    rep = _report("2 discretization equivalence (10 genotypes, 1e-5)",
                  suites.run_equivalence_suite(n_genotypes=10, tol=1e-5))
    assert rep.passed, rep.details


def test_acceptance_3_dlinear_reduction():
    rep = _report("3 DLinear reduction (test MSE <= 1e-3)", suites.run_dlinear_reduction())
    assert rep.passed, rep.details
    assert rep.seconds < 180


def test_acceptance_4_pruning_vs_oracle():
    rep = _report("4 pruning vs brute-force oracle (top-2 in >= 4/5 seeds)",
                  suites.run_pruning_oracle_suite())
    assert rep.passed, rep.details
    assert rep.seconds < 600


def test_acceptance_5_structural_invariants():
    rep = _report("5 structural invariants (50 random tiny searches)",
                  suites.run_structural_suite(n_runs=50))
    assert rep.passed, rep.details


def test_acceptance_6_end_to_end_smoke():
    rep = _report("6 end-to-end smoke (beats repeat-last by >= 20% in >= 4/5 seeds)",
                  suites.run_e2e_smoke())
    assert rep.passed, rep.details
    assert rep.seconds < 900


def test_acceptance_7_determinism():
    rep = _report("7 determinism (hash-identical genotype, metrics within 1e-7)",
                  suites.run_determinism_suite())
    assert rep.passed, rep.details


def test_acceptance_8_eval_mode_protocol():
    rep = _report("8 eval-mode protocol during arch updates", suites.run_eval_mode_suite())
    assert rep.passed, rep.details


def test_acceptance_9_profiling_sanity():
    rep = _report("9 profiling sanity (params subset, monotone forward time)",
                  suites.run_profile_suite())
    assert rep.passed, rep.details
