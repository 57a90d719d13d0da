#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bdsense {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitIo = 3 };

struct CommandOptions {
    std::filesystem::path config;  ///< empty: built-in defaults
    std::filesystem::path input;   ///< dataset (estimate) or aggregate CSV (report)
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> method;   ///< single method; overrides the config list
    std::optional<std::string> snr;      ///< SNR list text; overrides the config
    std::optional<int> trials;
    bool quiet = false;                  ///< suppress sweep progress
};

/// Identifiability verdicts for the configured methods plus the dual-synthesis
/// consistency check at reduced size (T capped at 16).
int cmd_check(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// One scene, synthesized and noised as trial 0 of a sweep with the same seed.
int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// One method on one dataset; appends a per-trial row to opts.out.
int cmd_estimate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Full sweep; writes <out>/trials.csv and <out>/aggregate.csv.
int cmd_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Terminal table of an aggregate CSV.
int cmd_report(const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace bdsense
