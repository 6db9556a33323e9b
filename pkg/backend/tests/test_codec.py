"""
Bundle wire codec: golden vectors, round-trips, rejection of malformed input.
"""

import random

import cbor2
import pytest
from hypothesis import given, settings

from backend.src.bundle import (
    AuditLog,
    Bundle,
    BundleFlags,
    CreationTimestamp,
    CrcType,
    EndpointId,
    EventKind,
    decode_bundle,
    digest,
    encode_bundle,
)
from backend.src.bundle.crc import compute_crc
from backend.src.utils.errors import MalformedBundle

from .strategies import bundles
from .support import read_vector, read_vector_table

# =============================================================================
# Golden vectors
# =============================================================================


class TestVectors:
    def test_encode_matches_vector(self, vector_bundle):
        assert encode_bundle(vector_bundle) == read_vector("bundle_ipn_crc_none.hex")

    def test_decode_vector(self, vector_bundle):
        assert decode_bundle(read_vector("bundle_ipn_crc_none.hex")) == vector_bundle

    def test_vector_layout(self):
        data = read_vector("bundle_ipn_crc_none.hex")
        assert len(data) == 40
        assert data[0] == 0x9F and data[-1] == 0xFF
        primary, payload_block = cbor2.loads(data)
        assert primary[:3] == [7, 0, 0]
        assert primary[3] == [2, [2, 0]]
        assert payload_block == [1, 1, 0, 0, b"cmd"]

    @pytest.mark.parametrize("name,expected", read_vector_table("crc.hex"))
    def test_crc_check_values(self, name, expected):
        crc_type = {"crc16": CrcType.CRC16, "crc32c": CrcType.CRC32C}[name]
        assert compute_crc(crc_type, b"123456789") == expected


# =============================================================================
# Round-trips
# =============================================================================


def _random_eid(rng: random.Random) -> EndpointId:
    if rng.random() < 0.5:
        return EndpointId.ipn(rng.getrandbits(rng.choice([8, 32, 64])), rng.getrandbits(16))
    name = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789.") for _ in range(rng.randint(1, 12)))
    return EndpointId.dtn(f"//x{name}/" + "app" * rng.randint(0, 2))


def _random_bundle(rng: random.Random) -> Bundle:
    return Bundle(
        destination=_random_eid(rng),
        source=_random_eid(rng),
        report_to=_random_eid(rng),
        creation=CreationTimestamp(rng.getrandbits(64), rng.getrandbits(rng.choice([1, 16, 64]))),
        lifetime_ms=rng.getrandbits(rng.choice([8, 32, 64])),
        payload=rng.randbytes(rng.choice([0, 1, 23, 24, 255, 256, 5000])),
        flags=rng.choice([BundleFlags.NONE, BundleFlags.NO_FRAGMENT, BundleFlags.ACK_REQUESTED]),
        crc_type=rng.choice(list(CrcType)),
    )


class TestRoundTrip:
    def test_thousand_random_bundles(self):
        rng = random.Random(2022)
        for _ in range(1000):
            bundle = _random_bundle(rng)
            encoded = encode_bundle(bundle)
            decoded = decode_bundle(encoded)
            assert decoded == bundle
            assert encode_bundle(decoded) == encoded

    @given(bundles)
    @settings(max_examples=200)
    def test_property(self, bundle):
        encoded = encode_bundle(bundle)
        assert decode_bundle(encoded) == bundle
        assert encode_bundle(decode_bundle(encoded)) == encoded

    @pytest.mark.parametrize("crc_type", list(CrcType))
    def test_each_crc_type(self, make_bundle, crc_type):
        bundle = make_bundle(crc_type=crc_type)
        assert decode_bundle(encode_bundle(bundle)).crc_type == crc_type

    def test_encoding_is_deterministic(self, make_bundle):
        assert encode_bundle(make_bundle()) == encode_bundle(make_bundle())


# =============================================================================
# Malformed input
# =============================================================================


def _raw(primary: list, payload_block: list) -> bytes:
    return b"\x9f" + cbor2.dumps(primary) + cbor2.dumps(payload_block) + b"\xff"


_PRIMARY = [7, 0, 0, [2, [2, 0]], [2, [1, 0]], [2, [1, 0]], [1000, 0], 3600000]
_PAYLOAD = [1, 1, 0, 0, b"cmd"]


class TestMalformed:
    def test_raw_helper_matches_vector(self):
        assert _raw(_PRIMARY, _PAYLOAD) == read_vector("bundle_ipn_crc_none.hex")

    def test_truncated(self):
        data = read_vector("bundle_ipn_crc_none.hex")
        for cut in range(len(data)):
            with pytest.raises(MalformedBundle):
                decode_bundle(data[:cut])

    def test_trailing_bytes(self):
        data = read_vector("bundle_ipn_crc_none.hex")
        for extra in (b"\x00", b"\xff", b"\x9f\xff"):
            with pytest.raises(MalformedBundle):
                decode_bundle(data + extra)

    def test_unsupported_version(self):
        with pytest.raises(MalformedBundle, match="version"):
            decode_bundle(_raw([6] + _PRIMARY[1:], _PAYLOAD))

    def test_bool_is_not_an_integer(self):
        with pytest.raises(MalformedBundle):
            decode_bundle(_raw(_PRIMARY[:7] + [True], _PAYLOAD))

    def test_fragment_flag(self):
        with pytest.raises(MalformedBundle, match="fragment"):
            decode_bundle(_raw([7, int(BundleFlags.IS_FRAGMENT)] + _PRIMARY[2:], _PAYLOAD))

    def test_extension_block(self):
        data = b"\x9f" + cbor2.dumps(_PRIMARY) + cbor2.dumps([7, 2, 0, 0, b"\x00"])
        data += cbor2.dumps(_PAYLOAD) + b"\xff"
        with pytest.raises(MalformedBundle):
            decode_bundle(data)

    def test_definite_length_outer_array(self):
        with pytest.raises(MalformedBundle):
            decode_bundle(cbor2.dumps([_PRIMARY, _PAYLOAD]))

    def test_crc_mismatch(self, make_bundle):
        data = bytearray(encode_bundle(make_bundle(payload=b"payload!", crc_type=CrcType.CRC32C)))
        data[data.index(b"payload!")] ^= 0x01
        with pytest.raises(MalformedBundle, match="CRC"):
            decode_bundle(bytes(data))

    def test_crc_type_mismatch_between_blocks(self):
        with pytest.raises(MalformedBundle):
            decode_bundle(_raw(_PRIMARY, [1, 1, 0, 1, b"cmd", b"\x00\x00"]))

    def test_payload_must_be_bytes(self):
        with pytest.raises(MalformedBundle):
            decode_bundle(_raw(_PRIMARY, [1, 1, 0, 0, "cmd"]))

    def test_bad_eid(self):
        with pytest.raises(MalformedBundle, match="destination"):
            decode_bundle(_raw(_PRIMARY[:3] + [[9, 0]] + _PRIMARY[4:], _PAYLOAD))

    def test_not_bytes(self):
        with pytest.raises(MalformedBundle):
            decode_bundle("9f ff")  # type: ignore[arg-type]

    def test_thousand_fuzz_inputs(self, make_bundle):
        rng = random.Random(9171)
        seeds = [
            encode_bundle(make_bundle(crc_type=crc_type, payload=rng.randbytes(40)))
            for crc_type in CrcType
        ]
        for _ in range(1000):
            choice = rng.random()
            if choice < 0.3:
                data = rng.randbytes(rng.randint(0, 80))
            else:
                data = bytearray(rng.choice(seeds))
                for _ in range(rng.randint(1, 4)):
                    position = rng.randrange(len(data))
                    if choice < 0.8:
                        data[position] = rng.getrandbits(8)
                    else:
                        del data[position]
                data = bytes(data)
            try:
                bundle = decode_bundle(data)
            except MalformedBundle:
                continue
            assert encode_bundle(bundle) == data


# =============================================================================
# Parse events and bundle helpers
# =============================================================================


class TestParseEvents:
    def test_records_digest_and_bundle_id(self, vector_bundle):
        log = AuditLog(lambda: 0.0)
        data = encode_bundle(vector_bundle)
        decode_bundle(data, log.scope("n1", "s1"))
        (event,) = log.events()
        assert event.kind == EventKind.PARSE
        assert (event.node, event.scope) == ("n1", "s1")
        assert event.digest == digest(data)
        assert event.bundle_id == vector_bundle.bundle_id

    def test_records_failed_parse(self):
        log = AuditLog(lambda: 0.0)
        with pytest.raises(MalformedBundle):
            decode_bundle(b"\x9f\x00\xff", log.scope("n1", "s1"))
        (event,) = log.events()
        assert event.detail == "malformed"
        assert event.digest == digest(b"\x9f\x00\xff")


class TestBundleModel:
    def test_bundle_id(self, vector_bundle):
        assert vector_bundle.bundle_id == "ipn:1.0@1000.0"

    def test_expiry_boundary(self, make_bundle):
        bundle = make_bundle(time_ms=1000, lifetime_ms=500)
        assert not bundle.is_expired(1499)
        assert bundle.is_expired(1500)
        assert bundle.remaining_lifetime_ms(1200) == 300
        assert bundle.remaining_lifetime_ms(9999) == 0

    @given(bundles)
    def test_expiry_is_monotone(self, bundle):
        expiry = bundle.expires_at_ms
        if expiry > 0:
            assert not bundle.is_expired(expiry - 1)
        assert bundle.is_expired(expiry)
        assert bundle.is_expired(expiry + 1)

    def test_fragment_flag_rejected(self):
        with pytest.raises(ValueError):
            Bundle(
                destination=EndpointId.ipn(2, 0),
                source=EndpointId.ipn(1, 0),
                creation=CreationTimestamp(0, 0),
                lifetime_ms=1,
                flags=BundleFlags.IS_FRAGMENT,
            )

    def test_out_of_range_lifetime(self):
        with pytest.raises(ValueError):
            Bundle(
                destination=EndpointId.ipn(2, 0),
                source=EndpointId.ipn(1, 0),
                creation=CreationTimestamp(0, 0),
                lifetime_ms=2**64,
            )
