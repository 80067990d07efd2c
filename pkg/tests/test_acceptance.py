"""Acceptance gate: every primary criterion at its stated tolerance.

Builds the benchmark artifacts once per session (set
``DDEBRANCH_ACCEPTANCE_DIR`` to reuse a directory across runs) and
prints one PASS/FAIL line per criterion.  The same machinery backs the
``ddebranch verify`` subcommand.
"""

import os

import pytest

from ddebranch.acceptance import CRITERIA, AcceptanceContext


@pytest.fixture(scope="session")
def ctx(tmp_path_factory):
    root = os.environ.get("DDEBRANCH_ACCEPTANCE_DIR")
    if not root:
        root = str(tmp_path_factory.mktemp("acceptance"))
    return AcceptanceContext(root, regen=True)


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(ctx, criterion, capsys):
    result = CRITERIA[criterion](ctx)
    with capsys.disabled():
        print(f"\n{result.line()}", flush=True)
    assert result.passed, result.details
