"""
Hypothesis strategies for bundles and endpoint identifiers.
"""

from hypothesis import strategies as st

from backend.src.bundle import Bundle, BundleFlags, CreationTimestamp, CrcType, EndpointId

UINT64 = st.integers(min_value=0, max_value=2**64 - 1)

ipn_eids = st.builds(EndpointId.ipn, UINT64, UINT64)

dtn_eids = st.from_regex(r"//[a-z][a-z0-9.-]{0,15}(/[a-z0-9_]{0,8}){0,2}", fullmatch=True).map(
    EndpointId.dtn
)

eids = st.one_of(ipn_eids, dtn_eids)

flags = st.sampled_from(
    [
        BundleFlags.NONE,
        BundleFlags.NO_FRAGMENT,
        BundleFlags.ACK_REQUESTED,
        BundleFlags.NO_FRAGMENT | BundleFlags.REPORT_DELIVERY,
    ]
)

bundles = st.builds(
    Bundle,
    destination=eids,
    source=eids,
    report_to=eids,
    creation=st.builds(CreationTimestamp, UINT64, UINT64),
    lifetime_ms=UINT64,
    payload=st.binary(max_size=512),
    flags=flags,
    crc_type=st.sampled_from(list(CrcType)),
)
