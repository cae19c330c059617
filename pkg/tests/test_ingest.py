import math

import pytest
from hypothesis import given, settings, strategies as st

from ocsvmids.errors import EmptyDataset, MalformedRecord, ParseError
from ocsvmids.ingest import (
    PACKET_LOG_HEADER,
    ScalingParams,
    apply_scaling,
    extract_features,
    fit_scaling,
    load_scaling,
    parse_packet_log,
    save_scaling,
    scale_all,
    str_to_flags,
    window_start,
    write_feature_dump,
    write_packet_log,
)
from ocsvmids.records import FeatureVector, PacketRecord, Protocol

from .test_records import make_record, packet_records


class TestParsePacketLog:
    def test_header_only_is_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(PACKET_LOG_HEADER) + "\n")
        with pytest.raises(EmptyDataset):
            parse_packet_log(path)

    def test_single_tcp_row(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text(
            ",".join(PACKET_LOG_HEADER)
            + "\n1.5,10.0.0.1,02:00:00:00:00:01,10.0.0.2,02:00:00:00:00:02,TCP,SYN|ACK,60\n"
        )
        records = parse_packet_log(path)
        assert len(records) == 1
        assert records[0].tcp_flags == frozenset({"SYN", "ACK"})

    def test_modbus_protocol_mapped(self, tmp_path):
        path = tmp_path / "mb.csv"
        path.write_text(
            ",".join(PACKET_LOG_HEADER)
            + "\n0.0,10.0.0.1,02:00:00:00:00:01,10.0.0.2,02:00:00:00:00:02,MODBUS,,64\n"
        )
        assert parse_packet_log(path)[0].protocol is Protocol.MODBUS

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            ",".join(PACKET_LOG_HEADER)
            + "\n0.0,10.0.0.1,02:00:00:00:00:01,10.0.0.2,02:00:00:00:00:02,TCP,,60\n"
            + "0.1,banana,02:00:00:00:00:01,10.0.0.2,02:00:00:00:00:02,TCP,,60\n"
        )
        with pytest.raises(MalformedRecord) as err:
            parse_packet_log(path)
        assert err.value.line == 3

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(MalformedRecord):
            parse_packet_log(path)

    def test_missing_file_is_os_error(self, tmp_path):
        with pytest.raises(OSError):
            parse_packet_log(tmp_path / "nope.csv")

    def test_round_trip_file(self, tmp_path):
        records = [make_record(ts=float(i), proto=Protocol.UDP, flags=()) for i in range(5)]
        path = write_packet_log(records, tmp_path / "rt.csv")
        assert parse_packet_log(path) == records


class TestExtractFeatures:
    def test_syn_burst_counts(self):
        records = [make_record(ts=0.1 * i, flags=("SYN",)) for i in range(10)]
        vectors = extract_features(records, 2.0)
        assert len(vectors) == 1
        v = dict(zip(
            ("pkt_rate", "byte_rate", "distinct_dst_count", "tcp_syn_count",
             "arp_count", "tcp_fin_count", "udp_fraction", "protocol_entropy"),
            vectors[0].values,
        ))
        assert v["pkt_rate"] == 5.0
        assert v["tcp_syn_count"] == 10.0
        assert v["arp_count"] == 0.0

    def test_single_protocol_zero_entropy(self):
        records = [make_record(ts=0.1 * i, proto=Protocol.UDP, flags=()) for i in range(6)]
        assert extract_features(records, 2.0)[0].values[7] == 0.0

    def test_even_two_protocol_mix_is_one_bit(self):
        # 4 TCP + 4 ARP: -2 * 0.5 * log2(0.5) = 1.0
        records = [make_record(ts=0.1 * i, flags=()) for i in range(4)]
        records += [make_record(ts=0.1 * i + 0.05, proto=Protocol.ARP, flags=()) for i in range(4)]
        vectors = extract_features(records, 2.0)
        assert vectors[0].values[7] == pytest.approx(1.0)

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            extract_features([], 2.0)

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            extract_features([make_record()], 0.0)

    def test_per_source_grouping(self):
        records = [make_record(ts=0.1, src_ip="10.0.0.1"), make_record(ts=0.2, src_ip="10.0.0.3")]
        vectors = extract_features(records, 2.0, per_source=True)
        assert len(vectors) == 2
        assert all(v.source is not None for v in vectors)


@settings(max_examples=50)
@given(st.lists(packet_records(), min_size=1, max_size=60))
def test_per_source_rates_sum_to_global_count(records):
    window_s = 2.0
    global_vectors = extract_features(records, window_s)
    per_source = extract_features(records, window_s, per_source=True)
    for g in global_vectors:
        total = sum(
            v.values[0] * window_s for v in per_source if v.window_start == g.window_start
        )
        assert total == pytest.approx(g.values[0] * window_s)


@settings(max_examples=50)
@given(st.lists(packet_records(), min_size=1, max_size=60))
def test_entropy_bounded(records):
    for v in extract_features(records, 2.0):
        assert 0.0 <= v.values[7] <= math.log2(6) + 1e-12


def fv(values, window=0.0):
    return FeatureVector(window_start=window, source=None, values=tuple(values))


class TestScaling:
    def test_single_vector_degenerate(self):
        v = fv([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0])
        params = fit_scaling([v])
        assert apply_scaling(v, params).values == (0.0,) * 8

    def test_min_max_learned(self):
        lo = fv([0.0] * 8)
        hi = fv([10.0] + [1.0] * 7)
        params = fit_scaling([lo, hi])
        assert params.mins[0] == 0.0 and params.maxs[0] == 10.0

    def test_constant_feature_scales_to_zero(self):
        a = fv([5.0] + [0.0] * 7)
        b = fv([5.0] + [1.0] * 7)
        params = fit_scaling([a, b])
        assert apply_scaling(a, params).values[0] == 0.0

    def test_endpoints_and_linearity(self):
        lo = fv([0.0] * 8)
        hi = fv([8.0] * 8)
        params = fit_scaling([lo, hi])
        assert apply_scaling(lo, params).values == (0.0,) * 8
        assert apply_scaling(hi, params).values == (1.0,) * 8
        quarter = fv([2.0] * 8)
        assert apply_scaling(quarter, params).values == (0.25,) * 8

    def test_out_of_range_clamps(self):
        params = fit_scaling([fv([0.0] * 8), fv([1.0] * 8)])
        beyond = fv([5.0] * 8)
        below = fv([-5.0] * 8)
        assert apply_scaling(beyond, params).values == (1.0,) * 8
        assert apply_scaling(below, params).values == (0.0,) * 8

    def test_identity_params_idempotent(self):
        params = ScalingParams(mins=(0.0,) * 8, maxs=(1.0,) * 8)
        v = fv([0.1, 0.5, 0.9, 0.0, 1.0, 0.25, 0.75, 0.33])
        assert apply_scaling(v, params).values == v.values

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            ScalingParams(mins=(1.0,) * 8, maxs=(0.0,) * 8)

    def test_save_load_round_trip(self, tmp_path):
        params = fit_scaling([fv([0.0] * 8), fv([3.5] * 8)])
        path = save_scaling(params, tmp_path / "scaler.txt")
        assert load_scaling(path) == params

    def test_load_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a scaler\n")
        with pytest.raises(ParseError):
            load_scaling(path)


def test_feature_dump_written(tmp_path):
    records = [make_record(ts=0.1), make_record(ts=0.3)]
    vectors = extract_features(records, 2.0, per_source=True)
    path = write_feature_dump(vectors, tmp_path / "dump.csv")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("window_start,src_ip,src_mac,pkt_rate")
    assert len(lines) == 1 + len(vectors)


def test_flag_parsing_helpers():
    assert str_to_flags("") == frozenset()
    assert str_to_flags("SYN|ACK") == frozenset({"SYN", "ACK"})


def test_window_start_grid():
    assert window_start(3.999, 2.0) == 2.0
    assert window_start(4.0, 2.0) == 4.0
