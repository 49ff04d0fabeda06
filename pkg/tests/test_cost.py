import csv
import io
import json
import numpy as np
import pytest
from numpy.testing import assert_allclose

from srpedge import cost, net
from srpedge.geometry import MicArray, build_grid, default_array, n_samp

K, FS, OVL = 4096, 16000, 0.25


@pytest.fixture(scope="module")
def arr():
    return default_array()


def circle_array(n, radius=0.05):
    a = 2 * np.pi * np.arange(n) / n
    return MicArray(np.stack([radius * np.cos(a), radius * np.sin(a), np.zeros(n)], axis=1))


class TestSrpFlops:
    def test_common_terms(self):
        N, P, B = 4, 6, K // 2 + 1
        common = 2 * N * K * 12 + 4 * P * B + 10 * N * B
        assert cost.srp_flops("td", N, K, 10, 30) == common + 2 * P * K * 12 + P * 10
        assert cost.srp_flops("lc", N, K, 10, 30) == common + 30 * (2 * K + 4) + 30 * 20
        assert cost.srp_flops("lc-edge", N, K, 10, 30) == common + (30 - 3) * (K + 2 + 20)

    def test_q_zero_limit(self):
        N, P = 12, 66
        common = cost.srp_flops("lc", N, K, 0, 0)
        assert cost.srp_flops("td", N, K, 0, 100) - common == 2 * P * K * 12
        assert cost.srp_flops("lc", N, K, 0, 100) - common == 100 * (2 * K + 4)
        assert cost.srp_flops("lc-edge", N, K, 0, 100) - common == (100 - P / 2) * (K + 2)

    def test_ordering_at_16k(self, arr):
        b = n_samp(arr, FS)
        td, lc, edge = (cost.srp_flops(m, 12, K, 128, b.total) for m in ("td", "lc", "lc-edge"))
        assert edge < lc < td

    def test_unknown(self):
        with pytest.raises(ValueError):
            cost.srp_flops("gcc", 4, K, 8, 8)

    @pytest.mark.parametrize("method", cost.SRP_METHODS)
    def test_monotone_in_K_Q_N(self, method):
        base = dict(n_mics=6, K=1024, Q=32, n_samp_total=60)
        ref = cost.srp_flops(method, **base)
        for key, bigger in (("K", 2048), ("Q", 64), ("n_mics", 8)):
            kw = dict(base, **{key: bigger})
            if key == "n_mics":
                kw["n_samp_total"] = 60 * 28 // 15
            assert cost.srp_flops(method, **kw) >= ref


class TestSrpMemory:
    def test_table_sizes(self):
        lc = cost.srp_onchip_values("lc", 12, K, 128, 6)
        edge = cost.srp_onchip_values("lc-edge", 12, K, 128, 6)
        td = cost.srp_onchip_values("td", 12, K, 128, 6)
        assert lc["sinc_table"] == 13 * 66 * 128
        assert edge["sinc_table"] == 7 * 66 * 128
        assert td["lag_table"] == 66 * 128
        assert lc["input"] == edge["input"] == 12 * K

    def test_edge_smaller_than_lc(self, arr):
        b = n_samp(arr, FS)
        lc = cost.srp_cost("lc", 12, K, 128, b, FS, OVL)
        edge = cost.srp_cost("lc-edge", 12, K, 128, b, FS, OVL)
        assert edge.srp_onchip_bytes < lc.srp_onchip_bytes
        assert edge.coeff_bytes / lc.coeff_bytes == pytest.approx(7 / 13)

    def test_sinc_amount(self):
        assert cost.sinc_amount(10, 0.1, 16000, 1000) == pytest.approx(0.1 * 16000 / 343 * 45 * 1000 * 4)
        assert cost.sinc_amount(10, 0.1, 16000, 1000, floor=True) == 4 * 45 * 1000 * 4

    def test_input_fetch_bandwidth(self, arr):
        r = cost.srp_cost("td", 12, K, 128, n_samp(arr, FS), FS, OVL)
        # every new sample of every channel is read once
        assert r.srp_bandwidth == pytest.approx(12 * FS * 4)


class TestDnn:
    def test_weights_refetched_every_frame(self):
        g = net.variant_graph("EM", 8, 16)
        fps = cost.frames_per_second(FS, K, OVL)
        r = cost.dnn_cost(g, fps)
        assert r.weight_bytes == net.count_params(g)["total"] * 4
        assert r.dnn_bandwidth == pytest.approx(r.weight_bytes * fps)

    def test_history_formula(self):
        g = net.build_graph(8, 16, 16, True)
        for name in ("input_conv", "a1_conv", "out_conv1", "out_conv2"):
            l = g.layer(name)
            assert l.history == (l.kernel[0] - 1) * l.dilation + 1
        assert g.layer("input_conv").history == 5

    @pytest.mark.parametrize("variant_pair", [("ES", "EM"), ("EM", "EL")])
    def test_monotone_in_C(self, variant_pair):
        fps = cost.frames_per_second(FS, K, OVL)
        lo, hi = (cost.dnn_cost(net.variant_graph(v, 8, 16), fps) for v in variant_pair)
        assert hi.dnn_flops_per_frame >= lo.dnn_flops_per_frame
        assert hi.weight_bytes >= lo.weight_bytes
        assert hi.dnn_onchip_bytes >= lo.dnn_onchip_bytes


class TestReport:
    def test_invariants(self, arr):
        r = cost.system_cost("EM", 8, 16, "lc-edge", arr)
        assert r.flops_per_frame == r.srp_flops_per_frame + r.dnn_flops_per_frame
        assert r.flops_per_second == pytest.approx(r.flops_per_frame * r.frames_per_second)
        assert r.operational_intensity == pytest.approx(r.flops_per_second / r.bandwidth_bytes_per_second)
        assert all(v >= 0 for k, v in r.as_record().items() if k != "label")

    def test_combine_rate_mismatch(self):
        with pytest.raises(ValueError):
            cost.combine(cost.CostReport(frames_per_second=1.0), cost.CostReport(frames_per_second=2.0))

    def test_same_srp_fields_across_C(self, arr):
        a = cost.system_cost("EL", 8, 16, "lc-edge", arr)
        b = cost.system_cost("ES", 8, 16, "lc-edge", arr)
        for f in ("srp_flops_per_frame", "coeff_bytes", "srp_onchip_bytes", "srp_bandwidth"):
            assert getattr(a, f) == getattr(b, f)

    def test_empty_csv(self):
        assert cost.roofline_emit([]) == ",".join(cost.ROOFLINE_FIELDS) + "\n"
        assert json.loads(cost.roofline_emit([], "json")) == []

    def test_emit_order_and_formats(self, arr):
        reps = [cost.system_cost(v, 8, 16, "lc-edge", arr) for v in ("ES", "baseline", "EM")]
        rows = list(csv.DictReader(io.StringIO(cost.roofline_emit(reps))))
        assert [r["label"] for r in rows] == [r.label for r in reps]
        js = json.loads(cost.roofline_emit(reps, "json"))
        assert_allclose([j["operational_intensity"] for j in js], [r.operational_intensity for r in reps])
        with pytest.raises(ValueError):
            cost.roofline_emit(reps, "xml")

    def test_frame_rate(self):
        assert cost.frames_per_second(16000, 4096, 0.25) == pytest.approx(16000 / 3072)
