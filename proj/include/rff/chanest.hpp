// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>

#include "rff/channel.hpp"

namespace rff {

enum class EstimatorKind { ls, mmse };

const char* estimator_name(EstimatorKind kind);

struct ChannelEstimate {
    SubcarrierVec h_hat;
    EstimatorKind method = EstimatorKind::ls;
    double snr_db_used = 0.0;
};

// Channel statistics feeding the MMSE weight matrix. The LS noise term is
// independent of h, so the cross-covariance with h_ls equals R_hh; it is
// still stored separately.
struct MmseStatistics {
    Eigen::MatrixXcd r_hh;     // 52 x 52, Hermitian PSD
    Eigen::MatrixXcd r_h_hls;  // 52 x 52
    std::int64_t sample_count = 0;

    void validate() const;
};

// 2 x 260 real training sample (row 0 = I, row 1 = Q), columns frame-major
// over the 5 data frames. Masked columns are exactly zero in both rows.
struct MaskRange {
    int begin = 0;
    int end = 0;  // exclusive
};

struct EqualizedSample {
    std::array<float, 2 * kSymbolsPerPacket> values{};
    EstimatorKind method = EstimatorKind::ls;
    int label = -1;
    std::vector<MaskRange> mask_spec;

    float& at(int row, int col) { return values[std::size_t(row * kSymbolsPerPacket + col)]; }
    float at(int row, int col) const { return values[std::size_t(row * kSymbolsPerPacket + col)]; }
};

// h_ls = y_p / x_p, entrywise over the pilot.
ChannelEstimate ls_estimate(const SubcarrierVec& pilot_rx, const SubcarrierVec& pilot_tx);

// Empirical pilot-row covariances from caller-provided channel draws.
MmseStatistics accumulate_mmse_statistics(const std::vector<SubcarrierVec>& h_rows);

// Samples n fresh channel realizations from cfg and accumulates their
// pilot rows. n >= 1e4 for a usable estimate.
MmseStatistics estimate_mmse_statistics(const ChannelConfig& cfg, std::int64_t n,
                                        std::uint64_t rng_seed);

// h_mmse = R_h_hls (R_hh + (1/SNR) I)^(-1) h_ls with SNR = 10^(snr_db/10).
// The weight matrix is formed per call, as the estimator is defined; no
// caching across calls.
ChannelEstimate mmse_estimate(const ChannelEstimate& ls, const MmseStatistics& stats,
                              double snr_db);

inline constexpr double kDeepFadeEps = 1e-9;

// x_hat = y / h_hat per subcarrier, one pilot-derived estimate for all five
// frames, reshaped to the 2 x 260 layout. Throws DeepFadeError when any
// |h_hat| <= 1e-9; the caller decides whether to drop the packet.
EqualizedSample equalize(const DataGrid& frames_rx, const ChannelEstimate& estimate);

// Zeroes one contiguous run of round(ratio * 260) columns in both rows.
EqualizedSample block_mask(const EqualizedSample& sample, double ratio, std::uint64_t rng_seed);

// One augmented view: AWGN at the drawn SNR, LS or MMSE equalization under
// that same SNR, then block masking.
EqualizedSample augment_view(const ReceivedFrame& packet, const MmseStatistics& stats,
                             EstimatorKind kind, int snr_db, double mask_ratio, Rng& rng);

// The Algorithm-1 augmentation block: independent integer SNR draws in
// [snr_lo, snr_hi], LS view + MMSE view, both masked at 10%.
std::pair<EqualizedSample, EqualizedSample> make_pair(const ReceivedFrame& packet,
                                                      const MmseStatistics& stats,
                                                      int snr_lo, int snr_hi,
                                                      std::uint64_t rng_seed);

// Ablation variant: both estimator kinds chosen by the caller
// (ls/ls, mmse/mmse, or ls/mmse for the mixed pipeline).
std::pair<EqualizedSample, EqualizedSample> make_pair_with_kinds(
    const ReceivedFrame& packet, const MmseStatistics& stats, EstimatorKind first,
    EstimatorKind second, int snr_lo, int snr_hi, double mask_ratio, std::uint64_t rng_seed);

// Clean (no added noise, no mask) equalized view of a stored packet at its
// base SNR; used for validation, hybrid inference, and feature export.
EqualizedSample clean_view(const ReceivedFrame& packet, const MmseStatistics& stats,
                           EstimatorKind kind, double snr_db);

// Cache file: JSON header {dims, sample_count, channel_config, seed} +
// little-endian f64 interleaved re/im for r_hh then r_h_hls.
void save_mmse_statistics(const std::string& path, const MmseStatistics& stats,
                          const ChannelConfig& cfg, std::uint64_t seed);
MmseStatistics load_mmse_statistics(const std::string& path, ChannelConfig* cfg_out = nullptr);

}  // namespace rff
