"""Stream mirroring (tee) semantics."""

import numpy as np

from iqsig import IqStream, generate_payload, mirror


def test_both_branches_see_identical_bytes(rng):
    stream = generate_payload(5.0, "16qam", rng)
    a, b = mirror(stream, chunk_size=1000)
    assert a.checksum() == b.checksum()


def test_collect_reproduces_stream(rng):
    stream = generate_payload(2.0, "qpsk", rng)
    a, b = mirror(stream)
    collected = a.collect()
    assert collected.samples.tobytes() == stream.samples.tobytes()
    assert collected.sample_rate == stream.sample_rate
    assert b.collect().samples.tobytes() == stream.samples.tobytes()


def test_consumers_are_independent(rng):
    stream = generate_payload(3.0, "16qam", rng)
    a, b = mirror(stream, chunk_size=512)
    # Fast consumer drains B completely before A reads anything.
    b_total = sum(len(c) for c in b)
    a_total = sum(len(c) for c in a)
    assert a_total == b_total == len(stream)


def test_interleaved_consumption_preserves_order(rng):
    stream = generate_payload(1.0, "16qam", rng)
    a, b = mirror(stream, chunk_size=100)
    ita, itb = iter(a), iter(b)
    parts_a, parts_b = [], []
    # Alternate with unequal strides.
    try:
        while True:
            parts_a.append(next(ita))
            parts_b.append(next(itb))
            parts_b.append(next(itb))
    except StopIteration:
        parts_a.extend(ita)
        parts_b.extend(itb)
    np.testing.assert_array_equal(np.concatenate(parts_a), stream.samples)
    np.testing.assert_array_equal(np.concatenate(parts_b), stream.samples)


def test_mirror_of_empty_stream():
    empty = IqStream(np.empty(0, dtype=np.complex128))
    a, b = mirror(empty)
    assert len(a.collect()) == 0
    assert len(b.collect()) == 0
