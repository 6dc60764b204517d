"""Randomized properties: round-trips, canonical soundness, determinism."""

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from propel.smcq import (
    canonicalize_property,
    parse_query,
    render_query,
    sort_key,
)

from oracle import atom_names, random_bool, random_query, scramble, truth_table


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_parse_render_round_trip(seed):
    rng = random.Random(seed)
    q = random_query(rng)
    assert parse_query(render_query(q)) == q


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_canonicalization_idempotent(seed):
    rng = random.Random(seed)
    prop = random_bool(rng, rng.randint(1, 6))
    once = canonicalize_property(prop)
    assert canonicalize_property(once) == once


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_scrambled_property_has_same_canonical_form_and_truth_table(seed):
    rng = random.Random(seed)
    pool = ("a", "b", "c", "d")
    prop = random_bool(rng, rng.randint(1, 5), arithmetic=False, pool=pool)
    variant = scramble(rng, prop)
    assert canonicalize_property(prop) == canonicalize_property(variant)
    names = sorted(atom_names(prop) | atom_names(variant))
    assert truth_table(prop, names) == truth_table(variant, names)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_equal_canonical_forms_imply_equal_truth_tables(seed):
    rng = random.Random(seed)
    pool = ("a", "b", "c", "d")
    lhs = random_bool(rng, rng.randint(1, 4), arithmetic=False, pool=pool)
    rhs = random_bool(rng, rng.randint(1, 4), arithmetic=False, pool=pool)
    if canonicalize_property(lhs) != canonicalize_property(rhs):
        return
    names = sorted(atom_names(lhs) | atom_names(rhs))
    assert truth_table(lhs, names) == truth_table(rhs, names)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_sort_is_deterministic_total_order(seed):
    rng = random.Random(seed)
    exprs = [random_bool(rng, rng.randint(0, 3)) for _ in range(8)]
    shuffled = list(exprs)
    rng.shuffle(shuffled)
    assert sorted(exprs, key=sort_key) == sorted(shuffled, key=sort_key)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_canonical_render_parses_back_to_same_canonical_form(seed):
    rng = random.Random(seed)
    q = random_query(rng)
    from propel.smcq import canonicalize

    canon = canonicalize(q)
    again = canonicalize(parse_query(render_query(canon)))
    assert again == canon
