#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bdsense/eval.hpp"

namespace bdsense {

inline constexpr const char* kTrialColumns[] = {
    "method",   "snr_db",    "trial",     "seed",          "tau_true",  "tau_est",  "nu_true", "nu_est",   "phi_true",
    "phi_est",  "theta_true", "theta_est", "alpha_err_rel", "nmse_heff", "iters_s1", "iters_s2", "status"};

inline constexpr const char* kAggregateColumns[] = {"method",        "snr_db",       "nmse_heff_db",
                                                    "rmse_tau_norm", "rmse_nu_norm", "rmse_angle_rad",
                                                    "rmse_alpha",    "n_ok",         "n_fail"};

/// Shortest round-trip text of a double; "nan", "inf", "-inf" for the
/// non-finite values.
std::string format_number(double v);

void write_trial_header(std::ostream& out);
void write_trial_row(std::ostream& out, const TrialRecord& r);
void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records);

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Reads an aggregate CSV by column name, in any column order. Throws
/// Errc::configuration naming the first missing column, or the line of the
/// first malformed row.
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);

}  // namespace bdsense
