from __future__ import annotations

import pytest

from transpose_kit.nn.oracles import ORACLE_CASES, check_case, run_oracle_suite


@pytest.mark.parametrize("case", ORACLE_CASES, ids=lambda c: c.name)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_layer_gradients(case, seed: int) -> None:
    result = check_case(case, seed)
    assert result.passed, f"{case.name} seed {seed}: error {result.error:.2e}"


def test_oracle_cases_cover_both_directions() -> None:
    names = {case.name for case in ORACLE_CASES}
    for kind in ("linear", "conv2d", "deconv2d", "transformer_block", "positional_encoding"):
        assert kind in names
        assert f"{kind}^T" in names
    assert {"pool2d(avg)", "pool2d(max)", "upsample"} <= names


@pytest.mark.slow
def test_full_suite_ten_seeds() -> None:
    results = run_oracle_suite(tuple(range(10)))
    assert len(results) == 10 * len(ORACLE_CASES)
    assert all(r.passed for r in results)
