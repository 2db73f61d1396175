"""Signature embedding, stealth mapping, and ground-truth records."""

import math

import numpy as np
import pytest

from iqsig import (ChannelConfig, EmbedSchedule, ScheduleTooDense, StealthConfig,
                   apply_channel, embed, generate_payload, make_signature,
                   stealth_map, stealth_unmap)
from iqsig.embed import EmbedRecord, causal_rms

RANGE = (0.5, 1.0)


def _payload(rng, ms=10.0, mod="16qam"):
    return generate_payload(ms, mod, rng)


def test_schedule_arithmetic(rng, sigset5):
    stream = _payload(rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, start_offset_samples=0, gating_prob=1.0)
    out, record = embed(stream, sigset5[0], sched, np.random.default_rng(0))
    assert len(record.slots) == 10
    assert len(record.transmitted) == 10
    assert int(np.sum(out.samples != stream.samples)) == 500


def test_fully_gated_is_identity(rng, sigset5):
    stream = _payload(rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=0.0)
    out, record = embed(stream, sigset5[0], sched, np.random.default_rng(0))
    assert out.samples.tobytes() == stream.samples.tobytes()
    assert len(record.transmitted) == 0
    assert all(slot.gated for slot in record.slots)


def test_normal_mode_roundtrip_noiseless(rng, sigset5):
    stream = _payload(rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0)
    out, record = embed(stream, sigset5[1], sched, np.random.default_rng(1))
    for slot in record.transmitted:
        np.testing.assert_allclose(np.abs(out.samples[slot.sample_indices]),
                                   slot.values, atol=1e-6)


def test_non_target_samples_untouched(rng, sigset5):
    stream = _payload(rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=20, gating_prob=0.7)
    out, record = embed(stream, sigset5[0], sched, np.random.default_rng(2))
    touched = np.zeros(len(stream), dtype=bool)
    for slot in record.transmitted:
        touched[slot.sample_indices] = True
    np.testing.assert_array_equal(out.samples[~touched], stream.samples[~touched])


def test_phase_preserved_at_modified_indices(rng, sigset5):
    stream = _payload(rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0)
    out, record = embed(stream, sigset5[0], sched, np.random.default_rng(3))
    for slot in record.transmitted:
        idx = slot.sample_indices
        delta = np.angle(out.samples[idx] * np.conj(stream.samples[idx]))
        np.testing.assert_allclose(delta, 0.0, atol=1e-9)


def test_signatures_fresh_every_transmission(rng, sigset5):
    stream = generate_payload(100.0, "16qam", rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0)
    _, record = embed(stream, sigset5[0], sched, np.random.default_rng(4))
    assert len(record.transmitted) == 100
    seen = {tuple(slot.values) for slot in record.transmitted}
    assert len(seen) == 100


def test_gating_probability_statistics(sigset5):
    rng = np.random.default_rng(10)
    stream = generate_payload(400.0, "qpsk", rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=10, gating_prob=0.75)
    _, record = embed(stream, sigset5[0], sched, np.random.default_rng(5))
    frac = len(record.transmitted) / len(record.slots)
    bound = 4 * math.sqrt(0.75 * 0.25 / len(record.slots))
    assert abs(frac - 0.75) < bound


def test_schedule_too_dense(rng, sigset5):
    stream = _payload(rng, ms=2.0)
    sched = EmbedSchedule(period_ms=1.0, n_el=3000)
    with pytest.raises(ScheduleTooDense):
        embed(stream, sigset5[0], sched, np.random.default_rng(0))


def test_stream_too_short(rng, sigset5):
    stream = generate_payload(0.1, "qpsk", rng)  # 216 samples < offset + n_el
    sched = EmbedSchedule(period_ms=0.1, n_el=50, start_offset_samples=200)
    with pytest.raises(ValueError):
        embed(stream, sigset5[0], sched, np.random.default_rng(0))


def test_embed_deterministic(rng, sigset5):
    stream = _payload(rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=0.8,
                          stealth=StealthConfig(strength=0.5))
    a, rec_a = embed(stream, sigset5[0], sched, np.random.default_rng(6))
    b, rec_b = embed(stream, sigset5[0], sched, np.random.default_rng(6))
    assert a.samples.tobytes() == b.samples.tobytes()
    assert rec_a.to_dict() == rec_b.to_dict()


# ---------------------------------------------------------------------------
# stealth mapping
# ---------------------------------------------------------------------------

def test_stealth_map_at_midrange_returns_rms():
    cfg = StealthConfig(strength=0.4)
    assert stealth_map(0.75, 1.23, cfg, RANGE) == pytest.approx(1.23, rel=1e-12)


def test_stealth_map_formula_case():
    cfg = StealthConfig(strength=0.15)
    assert stealth_map(1.0, 1.0, cfg, RANGE) == pytest.approx(1.0375, rel=1e-12)


def test_stealth_unmap_inverts_map(rng):
    cfg = StealthConfig(strength=0.3)
    values = rng.uniform(0.5, 1.0, 10_000)
    mapped = stealth_map(values, 0.93, cfg, RANGE)
    np.testing.assert_allclose(stealth_unmap(mapped, 0.93, cfg, RANGE), values, atol=1e-12)


def test_stealth_unmap_of_rms_is_midrange():
    cfg = StealthConfig(strength=0.7)
    assert stealth_unmap(1.1, 1.1, cfg, RANGE) == pytest.approx(0.75, rel=1e-12)


def test_stealth_requires_positive_rms():
    cfg = StealthConfig()
    with pytest.raises(ValueError):
        stealth_map(0.8, 0.0, cfg, RANGE)
    with pytest.raises(ValueError):
        stealth_unmap(0.8, -1.0, cfg, RANGE)


def test_stealth_roundtrip_noiseless_constant_envelope(sigset5):
    rng = np.random.default_rng(20)
    stream = generate_payload(10.0, "qpsk", rng)
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0,
                          stealth=StealthConfig(strength=1.0))
    out, record = embed(stream, sigset5[0], sched, np.random.default_rng(7))
    for slot in record.transmitted:
        start = int(slot.sample_indices[0])
        rms = causal_rms(out.samples, start, sched.stealth.rms_window)
        recovered = stealth_unmap(np.abs(out.samples[slot.sample_indices]), rms,
                                  sched.stealth, RANGE)
        np.testing.assert_allclose(recovered, slot.values, atol=1e-6)


def test_stealth_recovery_noise_floor_at_20db(sigset5):
    # Monte Carlo oracle: at 20 dB the radial magnitude noise is
    # sqrt(P_noise/2) ~= 0.0707, and unmapping divides it by (rms * strength).
    strength = 1.0
    sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0,
                          stealth=StealthConfig(strength=strength))
    channel = ChannelConfig(snr_db=20.0)
    errors = []
    for trial in range(1000):
        rng = np.random.default_rng([100, trial])
        payload = generate_payload(1.0, "16qam", rng)
        out, record = embed(payload, sigset5[trial % 5], sched, rng)
        noisy = apply_channel(out, channel, rng)
        slot = record.transmitted[0]
        start = int(slot.sample_indices[0])
        rms = causal_rms(noisy.samples, start, sched.stealth.rms_window)
        recovered = stealth_unmap(np.abs(noisy.samples[slot.sample_indices]), rms,
                                  sched.stealth, RANGE)
        errors.append(np.sqrt(np.mean((recovered - slot.values) ** 2)))
    measured = float(np.mean(errors))
    predicted = math.sqrt(10 ** (-20 / 10) / 2) / strength
    assert measured == pytest.approx(predicted, rel=0.15)


def test_stealth_energy_closer_to_baseline_than_plain(sigset5):
    rng = np.random.default_rng(30)
    payload = generate_payload(50.0, "16qam", rng)
    plain_sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0)
    stealth_sched = EmbedSchedule(period_ms=1.0, n_el=50, gating_prob=1.0,
                                  stealth=StealthConfig(strength=1.0))
    plain, _ = embed(payload, sigset5[0], plain_sched, np.random.default_rng(8))
    stealth, _ = embed(payload, sigset5[0], stealth_sched, np.random.default_rng(8))
    from iqsig import ks_two_sample
    base_e = np.abs(payload.samples) ** 2
    ks_plain = ks_two_sample(np.abs(plain.samples) ** 2, base_e)
    ks_stealth = ks_two_sample(np.abs(stealth.samples) ** 2, base_e)
    assert ks_stealth <= 0.05
    assert ks_stealth < ks_plain


def test_stealth_schedule_needs_room_for_rms_window():
    with pytest.raises(ValueError):
        EmbedSchedule(period_ms=1.0, n_el=50, start_offset_samples=100,
                      stealth=StealthConfig(rms_window=256))


def test_schedule_validation():
    with pytest.raises(ValueError):
        EmbedSchedule(period_ms=0.0, n_el=10)
    with pytest.raises(ValueError):
        EmbedSchedule(period_ms=1.0, n_el=0)
    with pytest.raises(ValueError):
        EmbedSchedule(period_ms=1.0, n_el=10, gating_prob=1.5)
    with pytest.raises(ValueError):
        StealthConfig(strength=0.0)
    with pytest.raises(ValueError):
        StealthConfig(rms_window=8)


def test_record_json_roundtrip(rng, sigset5):
    stream = _payload(rng, ms=3.0)
    sched = EmbedSchedule(period_ms=1.0, n_el=10, gating_prob=0.5,
                          stealth=StealthConfig(strength=0.25, rms_window=128),
                          start_offset_samples=128)
    _, record = embed(stream, sigset5[2], sched, np.random.default_rng(9))
    back = EmbedRecord.from_dict(record.to_dict())
    assert back.source_id == record.source_id
    assert back.schedule == record.schedule
    assert len(back.slots) == len(record.slots)
    for a, b in zip(back.transmitted, record.transmitted):
        np.testing.assert_array_equal(a.sample_indices, b.sample_indices)
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_make_signature(rng, sigset5):
    sig = make_signature(sigset5[0], 50, rng, issued_at_ms=3.5)
    assert sig.values.shape == (50,)
    assert sig.source_id == sigset5[0].id
    assert sig.issued_at_ms == 3.5
