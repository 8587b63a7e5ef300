import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from capharness.rng import Stream, fnv1a64, hash64, mix64

U64 = st.integers(min_value=0, max_value=2**64 - 1)


def test_mix64_reference_values():
    # splitmix64 finalizer on small inputs, cross-checked against the
    # published reference sequence for seed 0 (state increments of the
    # golden gamma are applied by the caller, not here).
    assert mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
    assert mix64(2 * 0x9E3779B97F4A7C15 % 2**64) == 0x6E789E6AA1B965F4


def test_fnv1a64_reference_values():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


@given(U64)
def test_mix64_stays_in_range(z):
    assert 0 <= mix64(z) < 2**64


@given(U64, U64)
def test_hash64_order_sensitive(a, b):
    if a != b:
        assert hash64(a, b) != hash64(b, a)


def test_hash64_accepts_mixed_parts():
    # ints, strings and bytes can be folded together; strings hash as their
    # utf-8 bytes so "ab" and b"ab" agree.
    assert hash64("ab", 3) == hash64(b"ab", 3)
    assert hash64("ab", 3) != hash64("ab", 4)


def test_stream_is_deterministic():
    a = Stream(123).uniform((64,))
    b = Stream(123).uniform((64,))
    assert np.array_equal(a, b)


def test_stream_derive_is_independent_of_consumption():
    s1 = Stream(99)
    s1.uniform((1000,))
    s2 = Stream(99)
    assert np.array_equal(s1.derive("x").words(8), s2.derive("x").words(8))


def test_stream_derive_labels_differ():
    s = Stream(7)
    assert not np.array_equal(s.derive("a").words(8), s.derive("b").words(8))


def test_uniform_range_and_spread():
    u = Stream(42).uniform((10000,))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02


def test_normal_moments():
    x = Stream(5).normal((200000,), sigma=2.0)
    assert abs(x.mean()) < 0.02
    assert abs(x.std() - 2.0) < 0.02


def test_poisson_mean_tracks_rate():
    lam = np.full(100000, 4.0)
    x = Stream(11).poisson(lam)
    assert x.dtype.kind in "iu" or np.all(x == np.round(x))
    assert abs(x.mean() - 4.0) < 0.05


def test_poisson_zero_rate_is_zero():
    x = Stream(3).poisson(np.zeros(100))
    assert np.all(x == 0)


@settings(max_examples=25)
@given(st.integers(min_value=0, max_value=2**32))
def test_streams_with_distinct_seeds_differ(seed):
    a = Stream(seed).words(4)
    b = Stream(seed + 1).words(4)
    assert not np.array_equal(a, b)
