import json
from fractions import Fraction
from math import comb

import pytest

from virialkit.utils.output import jsonable, render_table
from virialkit.utils.parallel import ordered_map
from virialkit.utils.partitions import (
    anchored_splits,
    bell,
    inverse_multiplicity,
    multi_indices,
    ordered_assignments,
    set_partitions,
    sub_multisets,
)
from virialkit.utils.scalars import HARD_CORE, div, format_scalar, is_hard_core, magnitude, parse_scalar


@pytest.mark.parametrize("n, expected", [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15), (5, 52)])
def test_bell_numbers(n, expected):
    assert bell(n) == expected
    assert len(set(set_partitions(n))) == expected


def test_set_partition_blocks_cover_positions():
    for blocks in set_partitions(4):
        flat = sorted(p for block in blocks for p in block)
        assert flat == [0, 1, 2, 3]
        assert all(list(b) == sorted(b) for b in blocks)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ordered_assignment_count(n):
    expected = sum(comb(n, m) * m ** (n - m) for m in range(1, n + 1))
    assert len(ordered_assignments(n)) == expected


def test_sub_multisets_weights_sum_to_subsets():
    key = (0, 0, 1, 2)
    splits = sub_multisets(key)
    assert sum(w for _, _, w in splits) == 2 ** len(key)
    for part, rest, _ in splits:
        assert sorted(part + rest) == list(key)


def test_anchored_splits_keep_first_position():
    key = (0, 1, 1)
    splits = anchored_splits(key)
    assert sum(w for _, _, w in splits) == 4
    assert all(part[0] == 0 for part, _, _ in splits)


def test_inverse_multiplicity():
    assert inverse_multiplicity((0, 0, 1, 1, 1)) == Fraction(1, 12)
    assert inverse_multiplicity((0, 1, 2)) == 1


def test_multi_indices_are_sorted_and_counted():
    keys = multi_indices(3, 2)
    assert len(keys) == comb(3 + 2 - 1, 2)
    assert all(list(k) == sorted(k) for k in keys)


def test_parse_scalar_modes():
    assert parse_scalar("1/3", "rational") == Fraction(1, 3)
    assert parse_scalar("1/4", "float") == 0.25
    assert parse_scalar(2, "rational") == Fraction(2)
    assert isinstance(parse_scalar(2, "float"), float)
    assert parse_scalar("inf") is HARD_CORE
    assert parse_scalar(float("inf"), "rational") is HARD_CORE


def test_hard_core_marker():
    assert HARD_CORE == float("inf")
    assert HARD_CORE > 10
    assert is_hard_core(float("inf"))
    assert not is_hard_core(1e300)


def test_exact_helpers():
    assert div(1, 3) == Fraction(1, 3)
    assert div(1.0, 4) == 0.25
    assert magnitude(Fraction(-1, 2)) == Fraction(1, 2)
    assert format_scalar(Fraction(3, 1)) == "3"
    assert format_scalar(Fraction(-1, 3)) == "-1/3"
    assert format_scalar(HARD_CORE) == "inf"


def test_jsonable_converts_nested_scalars():
    payload = {"x": Fraction(1, 2), "y": [HARD_CORE, 1.5], "z": (1, None)}
    assert jsonable(payload) == {"x": "1/2", "y": ["inf", 1.5], "z": [1, None]}


def test_render_table_csv_and_json():
    rows = [{"n": 1, "v": Fraction(1, 2)}, {"n": 2, "v": None}]
    assert render_table(rows, ["n", "v"]) == "n,v\n1,1/2\n2,\n"
    payload = json.loads(render_table(rows, ["n", "v"], "json", {"seed": 3}))
    assert payload["columns"] == ["n", "v"]
    assert payload["rows"][0] == {"n": 1, "v": "1/2"}
    assert payload["meta"] == {"seed": 3}


@pytest.mark.parametrize("threads", [1, 4])
def test_ordered_map_keeps_order(threads):
    assert ordered_map(lambda x: x * x, range(10), threads) == [x * x for x in range(10)]
