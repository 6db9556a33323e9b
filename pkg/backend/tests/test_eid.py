"""
Endpoint identifier parsing, canonical text and CBOR form.
"""

import cbor2
import pytest
from hypothesis import given
from hypothesis import strategies as st

from backend.src.bundle import DTN_NONE, EidScheme, EndpointId, parse_eid, parse_pattern
from backend.src.utils.errors import MalformedEid

from .strategies import UINT64, eids
from .support import read_vector_table


class TestParseEid:
    def test_ipn(self):
        eid = parse_eid("ipn:2.0")
        assert eid.scheme == EidScheme.IPN
        assert (eid.node, eid.service) == (2, 0)
        assert str(eid) == "ipn:2.0"

    def test_scheme_is_case_insensitive(self):
        assert parse_eid("IPN:1.1") == EndpointId.ipn(1, 1)

    def test_leading_zeros_are_canonicalized(self):
        assert str(parse_eid("ipn:007.010")) == "ipn:7.10"

    def test_dtn_keeps_ssp_verbatim(self):
        eid = parse_eid("dtn://lower3.dtn/app/x")
        assert eid.ssp == "//lower3.dtn/app/x"
        assert eid.authority == "lower3.dtn"
        assert str(eid) == "dtn://lower3.dtn/app/x"

    def test_dtn_none(self):
        assert parse_eid("dtn:none") is DTN_NONE
        assert DTN_NONE.is_null
        assert DTN_NONE.authority is None

    def test_uint64_bounds(self):
        assert parse_eid(f"ipn:{2**64 - 1}.0").node == 2**64 - 1
        with pytest.raises(MalformedEid):
            parse_eid(f"ipn:{2**64}.0")

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "ipn",
            "foo:1.0",
            "ipn:1",
            "ipn:1.",
            "ipn:-1.0",
            "ipn:+1.0",
            "ipn: 1.0",
            "ipn:1.x",
            "ipn:1.0.0",
            "dtn:",
            "dtn:abc",
            "dtn:///path",
            "dtn://a b",
            "dtn://café",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(MalformedEid):
            parse_eid(text)

    def test_malformed_eid_is_a_value_error(self):
        with pytest.raises(ValueError):
            parse_eid("nope")

    @given(UINT64, UINT64)
    def test_ipn_text_round_trip(self, node, service):
        eid = EndpointId.ipn(node, service)
        assert parse_eid(str(eid)) == eid

    @given(eids)
    def test_text_round_trip(self, eid):
        assert parse_eid(str(eid)) == eid


class TestNodeId:
    def test_ipn_node_id(self):
        assert parse_eid("ipn:5.1").node_id() == parse_eid("ipn:5.0")

    def test_dtn_node_id(self):
        assert parse_eid("dtn://n3.s2/app").node_id() == parse_eid("dtn://n3.s2/")


class TestCborForm:
    @pytest.mark.parametrize("text,encoded", read_vector_table("eid.hex"))
    def test_vectors(self, text, encoded):
        eid = parse_eid(text)
        assert cbor2.dumps(eid.to_cbor()) == encoded
        assert EndpointId.from_cbor(cbor2.loads(encoded)) == eid

    @pytest.mark.parametrize(
        "value",
        [
            [3, 0],
            [1, 5],
            [1, "no-slashes"],
            [2, [1]],
            [2, [-1, 0]],
            [True, 0],
            "ipn:1.0",
            [1],
        ],
    )
    def test_rejects(self, value):
        with pytest.raises(MalformedEid):
            EndpointId.from_cbor(value)

    @given(eids)
    def test_round_trip(self, eid):
        assert EndpointId.from_cbor(cbor2.loads(cbor2.dumps(eid.to_cbor()))) == eid


class TestRoutePattern:
    def test_wildcard(self):
        pattern = parse_pattern("ipn:2.*")
        assert pattern.is_wildcard
        assert pattern.matches(parse_eid("ipn:2.7"))
        assert not pattern.matches(parse_eid("ipn:3.0"))
        assert not pattern.matches(parse_eid("dtn://two.dtn"))
        assert str(pattern) == "ipn:2.*"

    def test_exact(self):
        pattern = parse_pattern("dtn://marsgs.em")
        assert not pattern.is_wildcard
        assert pattern.matches(parse_eid("dtn://marsgs.em"))
        assert not pattern.matches(parse_eid("dtn://marsgs.mars"))

    @pytest.mark.parametrize("text", ["ipn:x.*", "ipn:.*", f"ipn:{2**64}.*", "dtn:*"])
    def test_rejects(self, text):
        with pytest.raises(MalformedEid):
            parse_pattern(text)

    @given(st.integers(min_value=0, max_value=1000), UINT64)
    def test_wildcard_matches_every_service(self, node, service):
        assert parse_pattern(f"ipn:{node}.*").matches(EndpointId.ipn(node, service))
