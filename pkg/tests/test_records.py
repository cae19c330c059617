import math

import pytest
from hypothesis import given, strategies as st

from ocsvmids.errors import EmptyDataset, MalformedRecord
from ocsvmids.ingest import record_to_row, row_to_record
from ocsvmids.records import (
    FEATURE_NAMES,
    AggregatedAlarm,
    Alert,
    AlertKind,
    FeatureVector,
    PacketRecord,
    Protocol,
    Severity,
    SourceId,
    SourceProfile,
    validate_dataset,
)


def make_record(ts=0.0, proto=Protocol.TCP, flags=("SYN",), src_ip="10.0.0.1", length=60):
    return PacketRecord(
        timestamp=ts,
        src_ip=src_ip,
        src_mac="02:00:00:00:00:01",
        dst_ip="10.0.0.2",
        dst_mac="02:00:00:00:00:02",
        protocol=proto,
        tcp_flags=frozenset(flags) if proto is Protocol.TCP else frozenset(),
        length=length,
    )


class TestValidateDataset:
    def test_in_order_identity(self):
        records = [make_record(ts=float(i)) for i in range(3)]
        assert validate_dataset(records) == records

    def test_sorts_by_timestamp(self):
        a, b = make_record(ts=2.0), make_record(ts=1.0)
        assert validate_dataset([a, b]) == [b, a]

    def test_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            validate_dataset([])


class TestPacketRecord:
    def test_flags_on_arp_rejected(self):
        with pytest.raises(MalformedRecord):
            PacketRecord(
                timestamp=0.0,
                src_ip="10.0.0.1",
                src_mac="02:00:00:00:00:01",
                dst_ip="10.0.0.2",
                dst_mac="02:00:00:00:00:02",
                protocol=Protocol.ARP,
                tcp_flags=frozenset({"SYN"}),
                length=60,
            )

    @pytest.mark.parametrize("ip", ["999.0.0.1", "10.0.0", "not-an-ip", ""])
    def test_bad_ip_rejected(self, ip):
        with pytest.raises(MalformedRecord):
            make_record(src_ip=ip)

    def test_bad_mac_rejected(self):
        with pytest.raises(MalformedRecord):
            PacketRecord(
                timestamp=0.0,
                src_ip="10.0.0.1",
                src_mac="zz:00:00:00:00:01",
                dst_ip="10.0.0.2",
                dst_mac="02:00:00:00:00:02",
                protocol=Protocol.UDP,
                tcp_flags=frozenset(),
                length=60,
            )

    def test_unknown_flag_rejected(self):
        with pytest.raises(MalformedRecord):
            make_record(flags=("SYN", "XXX"))

    def test_negative_timestamp_rejected(self):
        with pytest.raises(MalformedRecord):
            make_record(ts=-1.0)

    @pytest.mark.parametrize("length", [0, -4])
    def test_nonpositive_length_rejected(self, length):
        with pytest.raises(MalformedRecord):
            make_record(length=length)

    def test_mac_normalized_lowercase(self):
        r = PacketRecord(
            timestamp=0.0,
            src_ip="10.0.0.1",
            src_mac="02:AB:00:00:00:01",
            dst_ip="10.0.0.2",
            dst_mac="02:00:00:00:00:02",
            protocol=Protocol.UDP,
            tcp_flags=frozenset(),
            length=60,
        )
        assert r.src_mac == "02:ab:00:00:00:01"
        assert r.source == SourceId("10.0.0.1", "02:AB:00:00:00:01")


class TestSourceId:
    def test_equality_on_pair(self):
        a = SourceId("10.0.0.1", "02:00:00:00:00:01")
        b = SourceId("10.0.0.1", "02:00:00:00:00:99")
        assert a != b
        assert a == SourceId("10.0.0.1", "02:00:00:00:00:01")

    def test_invalid_rejected(self):
        with pytest.raises(MalformedRecord):
            SourceId("10.0.0.1", "nope")


class TestFeatureVector:
    def test_arp_count_is_fifth_feature(self):
        assert FEATURE_NAMES[4] == "arp_count"

    def test_length_enforced(self):
        with pytest.raises(ValueError):
            FeatureVector(window_start=0.0, source=None, values=(1.0,) * 7)

    def test_finiteness_enforced(self):
        values = [0.0] * 8
        values[3] = math.inf
        with pytest.raises(ValueError):
            FeatureVector(window_start=0.0, source=None, values=tuple(values))


class TestAlert:
    SRC = SourceId("10.0.0.1", "02:00:00:00:00:01")

    def test_ocsvm_requires_negative_score(self):
        with pytest.raises(ValueError):
            Alert(0.0, self.SRC, 0.5, 0.5, AlertKind.OCSVM)

    def test_weight_may_not_shrink(self):
        with pytest.raises(ValueError):
            Alert(0.0, self.SRC, -0.5, -0.25, AlertKind.OCSVM)

    def test_valid(self):
        a = Alert(0.0, self.SRC, -0.5, -1.0, AlertKind.OCSVM)
        assert a.weighted_score == -1.0


class TestAggregatedAlarm:
    SRC = SourceId("10.0.0.1", "02:00:00:00:00:01")

    def test_negative_qa_rejected(self):
        with pytest.raises(ValueError):
            AggregatedAlarm(self.SRC, -1.0, 1, Severity.POSSIBLE, 0.0, 1.0)

    def test_zero_qb_rejected(self):
        with pytest.raises(ValueError):
            AggregatedAlarm(self.SRC, 0.0, 0, Severity.POSSIBLE, 0.0, 1.0)

    def test_time_order_enforced(self):
        with pytest.raises(ValueError):
            AggregatedAlarm(self.SRC, 0.0, 1, Severity.POSSIBLE, 2.0, 1.0)


class TestSourceProfile:
    SRC = SourceId("10.0.0.1", "02:00:00:00:00:01")

    def test_at_most_five(self):
        with pytest.raises(ValueError):
            SourceProfile(self.SRC, 10, tuple(Protocol)[:6])

    def test_no_duplicates(self):
        with pytest.raises(ValueError):
            SourceProfile(self.SRC, 10, (Protocol.TCP, Protocol.TCP))

    def test_ranks(self):
        p = SourceProfile(self.SRC, 10, (Protocol.TCP, Protocol.ARP))
        assert p.protocol_ranks == [(Protocol.TCP, 1), (Protocol.ARP, 2)]


_ips = st.integers(1, 254).map(lambda n: f"10.0.0.{n}")
_macs = st.integers(1, 255).map(lambda n: f"02:00:00:00:00:{n:02x}")
_protocols = st.sampled_from(list(Protocol))


@st.composite
def packet_records(draw):
    proto = draw(_protocols)
    flags = (
        draw(st.sets(st.sampled_from(["SYN", "ACK", "FIN", "RST", "PSH", "URG"])))
        if proto is Protocol.TCP
        else frozenset()
    )
    return PacketRecord(
        timestamp=draw(st.floats(0, 1e6, allow_nan=False)),
        src_ip=draw(_ips),
        src_mac=draw(_macs),
        dst_ip=draw(_ips),
        dst_mac=draw(_macs),
        protocol=proto,
        tcp_flags=frozenset(flags),
        length=draw(st.integers(1, 65535)),
    )


@given(packet_records())
def test_record_serialization_round_trip(record):
    assert row_to_record(record_to_row(record)) == record
