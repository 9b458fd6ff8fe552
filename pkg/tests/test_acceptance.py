"""Every acceptance criterion at its stated tolerance, one report line each.

Criteria are run exactly as ``rfoptics verify`` runs them; none is
relaxed, so a criterion that the implementation cannot meet fails here.
"""

import os

import pytest

from rfoptics.acceptance import CRITERIA

THREADS = int(os.environ.get("RFOPTICS_THREADS", "1"))


@pytest.mark.parametrize("number,tag,fn", CRITERIA, ids=[f"{n:02d}-{t}" for n, t, _ in CRITERIA])
def test_criterion(number, tag, fn, tmp_path):
    res = fn(fast=False, threads=THREADS, out_dir=str(tmp_path))
    print()
    print(res.line())
    assert res.number == number and res.tag == tag
    assert res.passed, f"{tag}: measured {res.measured:.3e} exceeds tolerance {res.tolerance:.1e}"
