#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "bdsense/scene.hpp"

namespace bdsense {

/// One synthesized observation with everything needed to estimate from it and
/// to score the estimate.
struct Dataset {
    SystemConfig system;
    SceneTruth truth;
    std::uint64_t seed = 0;
    double snr_db = 0.0;           ///< requested; +inf for a noiseless dataset
    double realized_snr_db = 0.0;  ///< ‖Y‖²/‖Z‖² of the drawn noise, in dB
    bool noiseless = false;
    RisCodebook codebook;
    PilotSet pilots;
    ComplexMatrix g;
    ComplexTensor y;

    friend bool operator==(const Dataset& a, const Dataset& b);
};

/// Container layout (all integers and floats little-endian):
///
///   magic    8 bytes  "BDSDSET\0"
///   version  u32      1
///   count    u32      number of records
///   record   u32 name length, name bytes (ASCII),
///            u8 kind (1 = f64, 2 = complex f64 as re/im pairs, 3 = u64),
///            u32 rank, u64 extent per mode (first index fastest),
///            payload
///
/// Records: system (f64[9]), group_sizes (u64[K]), truth (f64[10]),
/// seed (u64[1]), snr (f64[3]: requested, realized, noiseless flag),
/// codebook (c128 N×N×T), pilots (c128 L×M×Q), channel (c128 L×N),
/// y (c128 L×MQ×T). Unknown records are skipped on load.
void save_dataset(const Dataset& d, std::ostream& out);
Dataset load_dataset(std::istream& in);

/// Throw Errc::io on open/read/write failures and on malformed containers.
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace bdsense
