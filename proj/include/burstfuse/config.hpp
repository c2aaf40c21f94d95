#pragma once

#include <string>

#include "burstfuse/merge.hpp"

namespace burstfuse {

// Applies a plain-text key=value config file ('#' comments allowed) onto a
// MergeConfig plus the simd variant choice. Unknown keys and malformed
// values throw UsageError. Recognized keys:
//   threads, simd, zoom, base_index, frame_cap, robustness, loss_threshold,
//   tile_size, search_radius, pyramid_levels, lk_iters, snr,
//   mc_bins, mc_samples, mc_seed, cache_dir,
//   finish, finish_sigma, finish_amount
void apply_config_file(const std::string& path, MergeConfig& cfg, std::string& simd);

}  // namespace burstfuse
