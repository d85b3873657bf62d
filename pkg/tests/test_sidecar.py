import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import nnauth
from nnauth import pnm, prng, sidecar
from nnauth.sidecar import (Descriptor, InvariantViolationError, MalformedHeaderError,
                            TruncatedPayloadError, decode, encode)

DATA = Path(__file__).parent / "data"
KEY = 0x0123456789ABCDEF


def make(**over):
    fields = dict(width=16, height=16, channels=1, block_size=8, margin=0.2, reps=1,
                  mode="per-channel", fingerprint=prng.key_fingerprint(KEY),
                  code_bits=np.array([1, 0, 1, 1], dtype=np.uint8),
                  biases=np.array([0.1, -0.2, 0.3, -0.4]))
    fields.update(over)
    return Descriptor(**fields)


def test_golden_vector_decodes_field_by_field():
    raw = (DATA / "golden_16x16_B8_R2.nnac").read_bytes()
    assert raw[:4] == b"NNAC"
    assert raw[4] == 1                       # version
    assert raw[5] == 1 and raw[6] == 0       # gray, per-channel
    assert struct.unpack_from("<IIII", raw, 8) == (16, 16, 8, 2)
    assert struct.unpack_from("<d", raw, 24)[0] == 0.2
    assert raw[32:40] == prng.key_fingerprint(KEY)
    assert struct.unpack_from("<QQ", raw, 40) == (4, 8)
    assert len(raw) == 56 + 1 + 8 * 8
    desc = decode(raw)
    assert desc.reps == 2 and desc.n_blocks == 4
    assert encode(desc) == raw


def test_golden_vector_reproduced_by_signing():
    img = pnm.read_pnm(DATA / "golden_16x16.pgm")
    desc = nnauth.sign_image(img, KEY, B=8, T=0.2, R=2)
    assert encode(desc) == (DATA / "golden_16x16_B8_R2.nnac").read_bytes()
    assert nnauth.verify_image(img, desc, KEY).cdr == 1.0


def test_roundtrip_and_determinism():
    desc = make()
    raw = encode(desc)
    assert encode(desc) == raw
    back = decode(raw)
    assert back == desc
    assert np.array_equal(back.code_bits, desc.code_bits)
    assert np.array_equal(back.biases, desc.biases)


def test_payload_size_512_gray():
    img = np.zeros((512, 512), dtype=np.uint8)
    raw = encode(nnauth.sign_image(img, KEY, B=8, R=1))
    assert len(raw) == sidecar.HEADER.size + 4096 // 8 + 4096 * 8


def test_corrupt_first_byte_is_malformed():
    raw = bytearray(encode(make()))
    raw[0] ^= 0xFF
    with pytest.raises(MalformedHeaderError):
        decode(bytes(raw))


def test_missing_tail_is_truncated():
    with pytest.raises(TruncatedPayloadError):
        decode(encode(make())[:-8])


@pytest.mark.parametrize("offset,value", [(4, 2), (6, 5), (7, 1)])
def test_bad_header_fields(offset, value):
    raw = bytearray(encode(make()))
    raw[offset] = value
    with pytest.raises(MalformedHeaderError):
        decode(bytes(raw))


def test_trailing_bytes_rejected():
    with pytest.raises(InvariantViolationError):
        decode(encode(make()) + b"\0")


def test_nonzero_padding_rejected():
    raw = bytearray(encode(make()))
    raw[56] |= 0x01
    with pytest.raises(InvariantViolationError):
        decode(bytes(raw))


@pytest.mark.parametrize("over", [
    dict(margin=0.6), dict(reps=0), dict(block_size=1), dict(channels=2),
    dict(mode="yuv"), dict(fingerprint=b"short"),
    dict(code_bits=np.array([1, 0, 2, 1])), dict(code_bits=np.array([1, 0, 1])),
    dict(biases=np.array([0.1, np.nan, 0.3, 0.4])), dict(biases=np.zeros(5)),
    dict(width=4),
])
def test_encode_rejects_invalid(over):
    with pytest.raises(InvariantViolationError):
        encode(make(**over))


def test_invariant_violation_in_payload_detected():
    raw = bytearray(encode(make()))
    struct.pack_into("<d", raw, 24, 0.75)
    with pytest.raises(InvariantViolationError):
        decode(bytes(raw))


def test_error_categories_are_distinct():
    kinds = {MalformedHeaderError, TruncatedPayloadError, InvariantViolationError}
    for k in kinds:
        assert issubclass(k, sidecar.DescriptorError)
        assert all(not issubclass(k, other) for other in kinds - {k})


def test_save_load(tmp_path):
    desc = make(reps=2, biases=np.linspace(-1, 1, 8))
    sidecar.save(desc, tmp_path / "d.nnac")
    assert sidecar.load(tmp_path / "d.nnac") == desc


descriptors = st.builds(
    lambda ch, mode, B, rows, cols, R, T, key, data: make(
        width=cols * B + data.draw(st.integers(0, B - 1)),
        height=rows * B + data.draw(st.integers(0, B - 1)),
        channels=ch, mode=mode, block_size=B, reps=R, margin=T,
        fingerprint=prng.key_fingerprint(key),
        code_bits=np.array(data.draw(st.lists(st.integers(0, 1),
                                              min_size=(1 if mode == "luma" else ch) * rows * cols,
                                              max_size=(1 if mode == "luma" else ch) * rows * cols)),
                           dtype=np.uint8),
        biases=np.array(data.draw(st.lists(
            st.floats(allow_nan=False, allow_infinity=False),
            min_size=(1 if mode == "luma" else ch) * rows * cols * R,
            max_size=(1 if mode == "luma" else ch) * rows * cols * R)))),
    st.sampled_from([1, 3]), st.sampled_from(sidecar.MODES), st.integers(2, 9),
    st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.floats(0, 0.5),
    st.integers(0, 2**64 - 1), st.data(),
)


@given(descriptors)
def test_decode_encode_identity(desc):
    raw = encode(desc)
    back = decode(raw)
    assert encode(back) == raw
    assert np.array_equal(back.biases.view(np.uint64),
                          np.asarray(desc.biases, dtype=np.float64).view(np.uint64))


@settings(max_examples=300)
@given(st.binary(max_size=200))
def test_random_bytes_never_crash(data):
    try:
        desc = decode(data)
    except sidecar.DescriptorError:
        return
    assert encode(desc) == data


def test_fuzz_mutations_never_crash():
    """Byte flips, truncations and splices of valid descriptors: 100k rounds."""
    rng = np.random.default_rng(2024)
    seeds = [encode(make()), (DATA / "golden_16x16_B8_R2.nnac").read_bytes(),
             encode(make(channels=3, mode="luma"))]
    outcomes = {"ok": 0, "error": 0}
    for i in range(100_000):
        raw = bytearray(seeds[i % len(seeds)])
        op = i % 4
        if op == 0:
            for _ in range(rng.integers(1, 4)):
                raw[rng.integers(len(raw))] = rng.integers(256)
        elif op == 1:
            raw = raw[:rng.integers(len(raw))]
        elif op == 2:
            pos = rng.integers(len(raw))
            raw[pos:pos] = rng.integers(0, 256, rng.integers(1, 16), dtype=np.uint8).tobytes()
        else:
            pos = rng.integers(8, 56)
            raw[pos] = rng.integers(256)
        try:
            desc = decode(bytes(raw))
        except sidecar.DescriptorError:
            outcomes["error"] += 1
        else:
            assert encode(desc) == bytes(raw)
            outcomes["ok"] += 1
    assert sum(outcomes.values()) == 100_000
