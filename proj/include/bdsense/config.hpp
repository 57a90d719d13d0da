#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bdsense/eval.hpp"

namespace bdsense {

/// Everything a config file can set. Unset keys keep the documented defaults
/// (Table-I system, SNR list −10:5:30 dB, 200 trials, methods ntfe,kf,ls).
struct AppConfig {
    SweepConfig sweep;
    double scene_snr_db = 20.0;  ///< SNR of a single simulated dataset
    int workers = 1;
};

AppConfig default_config();

/// Parses the sectioned key = value (INI) format; comments are whole lines
/// starting with # or ;.
///
///   # comment
///   [system]             l_y l_z n_y n_z group_sizes m q t delta_f_hz carrier_hz
///   [scene]              d_st_ris_min_m d_st_ris_max_m d_ris_target_min_m
///                        d_ris_target_max_m velocity_min_mps velocity_max_mps
///                        rcs_m2 snr_db
///   [bals]               i_max delta pinv_tol gain_rule (ls | ratio)
///   [sweep]              snr_db trials seed methods workers kf_split (angle | nested)
///   [ml_grid]            tau_points nu_points phi_points theta_points refinements
///                        tau_lo_s tau_hi_s nu_lo_hz nu_hi_hz
///                        phi_lo_rad phi_hi_rad theta_lo_rad theta_hi_rad
///
/// Lists are comma separated; an SNR list may also be a range lo:step:hi.
/// Unknown sections or keys, duplicate sections or keys and malformed values
/// throw Errc::configuration with "<source>:<line>: ..." in the message.
AppConfig parse_config(std::string_view text, std::string_view source = "<config>");

/// Throws Errc::io when the file cannot be read.
AppConfig load_config(const std::filesystem::path& path);

/// "-10:5:30", "10, 20" or "inf". Throws Errc::configuration.
std::vector<double> parse_snr_list(std::string_view text);

/// Master seed by precedence: explicit flag, then BDSENSE_SEED, then config.
/// Throws Errc::configuration when BDSENSE_SEED is set but not an integer.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed);

}  // namespace bdsense
