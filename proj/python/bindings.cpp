// SPDX-License-Identifier: Apache-2.0
//
// rffsim._core: python bindings over the main operations of the workbench.
// Complex frames cross the boundary as numpy arrays; training entry points
// mirror the CLI pipeline.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rff/checkpoint.hpp"
#include "rff/metrics.hpp"
#include "rff/pipeline.hpp"

namespace py = pybind11;
using namespace rff;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

SubcarrierVec to_pilot(const ComplexArray& arr) {
    if (arr.ndim() != 1 || arr.shape(0) != kSubcarriers)
        throw ShapeError("expected a complex vector of length 52");
    SubcarrierVec v;
    std::copy(arr.data(), arr.data() + kSubcarriers, v.begin());
    return v;
}

DataGrid to_data(const ComplexArray& arr) {
    if (arr.ndim() != 2 || arr.shape(0) != kDataFrames || arr.shape(1) != kSubcarriers)
        throw ShapeError("expected a complex matrix of shape (5, 52)");
    DataGrid grid;
    for (int f = 0; f < kDataFrames; ++f)
        std::copy(arr.data() + f * kSubcarriers, arr.data() + (f + 1) * kSubcarriers,
                  grid[std::size_t(f)].begin());
    return grid;
}

py::array pilot_array(const SubcarrierVec& v) {
    // (count, ptr) form copies into a fresh owned array on every
    // pybind11 version; the bare count overload is not portable
    return py::array_t<std::complex<double>>(py::ssize_t(kSubcarriers), v.data());
}

py::array data_array(const DataGrid& grid) {
    py::array_t<std::complex<double>> out({kDataFrames, kSubcarriers});
    for (int f = 0; f < kDataFrames; ++f)
        std::copy(grid[std::size_t(f)].begin(), grid[std::size_t(f)].end(),
                  out.mutable_data() + f * kSubcarriers);
    return out;
}

py::array sample_array(const EqualizedSample& s) {
    py::array_t<float> out({2, kSymbolsPerPacket});
    std::copy(s.values.begin(), s.values.end(), out.mutable_data());
    return out;
}

py::array hfreq_array(const ChannelRealization& ch) {
    py::array_t<std::complex<double>> out({kFrameRows, kSubcarriers});
    for (int r = 0; r < kFrameRows; ++r)
        std::copy(ch.h_freq[std::size_t(r)].begin(), ch.h_freq[std::size_t(r)].end(),
                  out.mutable_data() + r * kSubcarriers);
    return out;
}

RunConfig config_from_json_str(const std::string& text) {
    return RunConfig::from_json_text(text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Residual-channel contrastive learning workbench core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    m.attr("SUBCARRIERS") = kSubcarriers;
    m.attr("DATA_FRAMES") = kDataFrames;
    m.attr("SYMBOLS_PER_PACKET") = kSymbolsPerPacket;

    py::class_<DeviceProfile>(m, "DeviceProfile")
        .def(py::init([](int device_id, double amp_db, double phase_deg) {
                 DeviceProfile p{device_id, amp_db, phase_deg};
                 p.validate();
                 return p;
             }),
             py::arg("device_id"), py::arg("amp_imbalance_db"), py::arg("phase_imbalance_deg"))
        .def_readonly("device_id", &DeviceProfile::device_id)
        .def_readonly("amp_imbalance_db", &DeviceProfile::amp_imbalance_db)
        .def_readonly("phase_imbalance_deg", &DeviceProfile::phase_imbalance_deg);

    py::class_<DeviceSet>(m, "DeviceSet")
        .def_static("evenly_spaced", &DeviceSet::evenly_spaced, py::arg("count") = 7)
        .def_property_readonly("devices",
                               [](const DeviceSet& s) { return s.devices; });

    py::class_<ChannelConfig>(m, "ChannelConfig")
        .def(py::init<>())
        .def_readwrite("rms_delay_ns", &ChannelConfig::rms_delay_ns)
        .def_readwrite("sample_period_ns", &ChannelConfig::sample_period_ns)
        .def_readwrite("num_taps", &ChannelConfig::num_taps)
        .def_readwrite("doppler_hz_min", &ChannelConfig::doppler_hz_min)
        .def_readwrite("doppler_hz_max", &ChannelConfig::doppler_hz_max)
        .def_readwrite("frame_interval_s", &ChannelConfig::frame_interval_s)
        .def_readwrite("base_snr_db", &ChannelConfig::base_snr_db);

    py::class_<FrequencyFrame>(m, "FrequencyFrame")
        .def_property_readonly("pilot", [](const FrequencyFrame& f) { return pilot_array(f.pilot); })
        .def_property_readonly("data", [](const FrequencyFrame& f) { return data_array(f.data); });

    py::class_<ImpairedFrame>(m, "ImpairedFrame")
        .def_property_readonly("pilot", [](const ImpairedFrame& f) { return pilot_array(f.pilot); })
        .def_property_readonly("data", [](const ImpairedFrame& f) { return data_array(f.data); })
        .def_readonly("source_device", &ImpairedFrame::source_device);

    py::class_<ChannelRealization>(m, "ChannelRealization")
        .def_property_readonly("h_freq", &hfreq_array)
        .def_readonly("doppler_hz", &ChannelRealization::doppler_hz);

    py::class_<ReceivedFrame>(m, "ReceivedFrame")
        .def_property_readonly("pilot_rx",
                               [](const ReceivedFrame& f) { return pilot_array(f.signal.pilot); })
        .def_property_readonly("data_rx",
                               [](const ReceivedFrame& f) { return data_array(f.signal.data); })
        .def_readonly("device_id", &ReceivedFrame::device_id)
        .def_readonly("snr_db", &ReceivedFrame::snr_db);

    py::class_<MmseStatistics>(m, "MmseStatistics")
        .def_readonly("sample_count", &MmseStatistics::sample_count);

    py::class_<EqualizedSample>(m, "EqualizedSample")
        .def_property_readonly("values", &sample_array)
        .def_property_readonly("method",
                               [](const EqualizedSample& s) {
                                   return std::string(estimator_name(s.method));
                               })
        .def_readonly("label", &EqualizedSample::label)
        .def_property_readonly("mask_spec", [](const EqualizedSample& s) {
            std::vector<std::pair<int, int>> out;
            for (const auto& r : s.mask_spec) out.emplace_back(r.begin, r.end);
            return out;
        });

    // waveform
    m.def("qpsk_modulate", &qpsk_modulate, py::arg("bits"), py::arg("count"));
    m.def("lts_sequence", [] { return pilot_array(lts_sequence()); });
    m.def("build_frame", &build_frame, py::arg("rng_seed"));
    m.def("apply_iq_imbalance", &apply_iq_imbalance, py::arg("frame"), py::arg("profile"));

    // channel
    m.def("sample_channel", &sample_channel, py::arg("config"), py::arg("rng_seed"));
    m.def(
        "apply_channel",
        [](const ImpairedFrame& frame, const ChannelRealization& ch) {
            const PacketSignal out = apply_channel(frame, ch);
            return py::make_tuple(pilot_array(out.pilot), data_array(out.data));
        },
        py::arg("frame"), py::arg("channel"));
    m.def(
        "add_awgn",
        [](const ComplexArray& pilot, const ComplexArray& data, double snr_db,
           std::uint64_t seed) {
            const PacketSignal noisy = add_awgn({to_pilot(pilot), to_data(data)}, snr_db, seed);
            return py::make_tuple(pilot_array(noisy.pilot), data_array(noisy.data));
        },
        py::arg("pilot"), py::arg("data"), py::arg("snr_db"), py::arg("rng_seed"));

    // channel estimation and augmentation
    m.def(
        "ls_estimate",
        [](const ComplexArray& pilot_rx, const ComplexArray& pilot_tx) {
            const auto est = ls_estimate(to_pilot(pilot_rx), to_pilot(pilot_tx));
            return pilot_array(est.h_hat);
        },
        py::arg("pilot_rx"), py::arg("pilot_tx"));
    m.def("estimate_mmse_statistics", &estimate_mmse_statistics, py::arg("config"),
          py::arg("sample_count"), py::arg("rng_seed"));
    m.def(
        "mmse_estimate",
        [](const ComplexArray& h_ls, const MmseStatistics& stats, double snr_db) {
            ChannelEstimate ls;
            ls.method = EstimatorKind::ls;
            ls.h_hat = to_pilot(h_ls);
            return pilot_array(mmse_estimate(ls, stats, snr_db).h_hat);
        },
        py::arg("h_ls"), py::arg("stats"), py::arg("snr_db"));
    m.def(
        "equalize",
        [](const ComplexArray& data_rx, const ComplexArray& h_hat) {
            ChannelEstimate est;
            est.method = EstimatorKind::ls;
            est.h_hat = to_pilot(h_hat);
            return equalize(to_data(data_rx), est);
        },
        py::arg("data_rx"), py::arg("h_hat"));
    m.def("block_mask", &block_mask, py::arg("sample"), py::arg("ratio"), py::arg("rng_seed"));
    m.def(
        "make_pair",
        [](const ReceivedFrame& packet, const MmseStatistics& stats, int snr_lo, int snr_hi,
           std::uint64_t seed) {
            auto [a, b] = make_pair(packet, stats, snr_lo, snr_hi, seed);
            return py::make_tuple(std::move(a), std::move(b));
        },
        py::arg("packet"), py::arg("stats"), py::arg("snr_lo"), py::arg("snr_hi"),
        py::arg("rng_seed"));

    // dataset + metrics
    m.def("generate_dataset", &generate_dataset, py::arg("devices"), py::arg("channel"),
          py::arg("packets_per_device"), py::arg("rng_seed"));
    m.def("load_dataset",
          [](const std::string& path) { return load_dataset(path).first; });
    m.def("cosine_lr", &cosine_lr, py::arg("epoch"), py::arg("total_epochs"),
          py::arg("lr_max") = 1e-3, py::arg("lr_min") = 1e-4);
    m.def(
        "kmeans",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> features, int k,
           int restarts, std::uint64_t seed) {
            if (features.ndim() != 2) throw ShapeError("features must be 2-d");
            FeatureMatrix fm;
            fm.rows = features.shape(0);
            fm.dims = int(features.shape(1));
            fm.values.assign(features.data(), features.data() + fm.rows * fm.dims);
            fm.labels.assign(std::size_t(fm.rows), 0);
            return kmeans(fm, k, restarts, seed).assignments;
        },
        py::arg("features"), py::arg("k"), py::arg("restarts") = 10, py::arg("seed") = 0);
    m.def(
        "nmi",
        [](const std::vector<int>& a, const std::vector<int>& b) {
            Partition pa, pb;
            pa.assignments = a;
            pb.assignments = b;
            for (int v : a) pa.k = std::max(pa.k, v + 1);
            for (int v : b) pb.k = std::max(pb.k, v + 1);
            return nmi(pa, pb);
        },
        py::arg("a"), py::arg("b"));
    m.def("accuracy", &accuracy, py::arg("predictions"), py::arg("labels"));

    // pipeline
    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_static("from_json", &config_from_json_str, py::arg("text"))
        .def("to_json", &RunConfig::to_json_text)
        .def("config_hash", &RunConfig::config_hash)
        .def_readwrite("device_count", &RunConfig::device_count)
        .def_readwrite("packets_per_device", &RunConfig::packets_per_device)
        .def_readwrite("stats_samples", &RunConfig::stats_samples)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("out_dir", &RunConfig::out_dir)
        .def_readwrite("deterministic", &RunConfig::deterministic)
        .def_property(
            "mode", [](const RunConfig& c) { return std::string(train_mode_name(c.mode)); },
            [](RunConfig& c, const std::string& name) { c.mode = train_mode_from_string(name); });

    m.def("cmd_gen", &cmd_gen, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("cmd_pretrain", &cmd_pretrain, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("cmd_finetune", &cmd_finetune, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("cmd_eval", &cmd_eval, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    m.def("set_max_threads", &set_max_threads, py::arg("n"));
}
