#include "bdsense/results_csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{}", v);
}

namespace {

template <std::size_t N>
void header(std::ostream& out, const char* const (&cols)[N]) {
    for (std::size_t i = 0; i < N; ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const char* column, std::size_t line) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(Errc::configuration, fmt::format("line {}: column {} holds '{}', not a number", line, column, s));
    return v;
}

int parse_int(const std::string& s, const char* column, std::size_t line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(Errc::configuration, fmt::format("line {}: column {} holds '{}', not an integer", line, column, s));
    return v;
}

}  // namespace

void write_trial_header(std::ostream& out) { header(out, kTrialColumns); }

void write_trial_row(std::ostream& out, const TrialRecord& r) {
    out << to_string(r.method) << ',' << format_number(r.snr_db) << ',' << r.trial << ',' << r.seed << ','
        << format_number(r.tau_true) << ',' << format_number(r.tau_est) << ',' << format_number(r.nu_true) << ','
        << format_number(r.nu_est) << ',' << format_number(r.phi_true) << ',' << format_number(r.phi_est) << ','
        << format_number(r.theta_true) << ',' << format_number(r.theta_est) << ',' << format_number(r.alpha_err_rel)
        << ',' << format_number(r.nmse_heff) << ',' << r.iters_s1 << ',' << r.iters_s2 << ',' << r.status << '\n';
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
    write_trial_header(out);
    for (const auto& r : records) write_trial_row(out, r);
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    header(out, kAggregateColumns);
    for (const auto& r : rows)
        out << to_string(r.method) << ',' << format_number(r.snr_db) << ',' << format_number(r.nmse_heff_db) << ','
            << format_number(r.rmse_tau_norm) << ',' << format_number(r.rmse_nu_norm) << ','
            << format_number(r.rmse_angle_rad) << ',' << format_number(r.rmse_alpha) << ',' << r.n_ok << ','
            << r.n_fail << '\n';
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::configuration, "aggregate CSV is empty");
    const auto names = split_csv_line(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], i);
    for (const char* col : kAggregateColumns)
        if (!index.contains(col)) throw Error(Errc::configuration, fmt::format("missing column '{}'", col));

    std::vector<AggregateRow> rows;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != names.size())
            throw Error(Errc::configuration,
                        fmt::format("line {}: {} fields, header has {}", number, f.size(), names.size()));
        const auto at = [&](const char* col) -> const std::string& { return f[index.at(col)]; };
        AggregateRow r;
        try {
            r.method = parse_method(at("method"));
        } catch (const Error& e) {
            throw Error(Errc::configuration, fmt::format("line {}: {}", number, e.what()));
        }
        r.snr_db = parse_double(at("snr_db"), "snr_db", number);
        r.nmse_heff_db = parse_double(at("nmse_heff_db"), "nmse_heff_db", number);
        r.nmse_heff = std::pow(10.0, r.nmse_heff_db / 10.0);
        r.rmse_tau_norm = parse_double(at("rmse_tau_norm"), "rmse_tau_norm", number);
        r.rmse_nu_norm = parse_double(at("rmse_nu_norm"), "rmse_nu_norm", number);
        r.rmse_angle_rad = parse_double(at("rmse_angle_rad"), "rmse_angle_rad", number);
        r.rmse_alpha = parse_double(at("rmse_alpha"), "rmse_alpha", number);
        r.n_ok = parse_int(at("n_ok"), "n_ok", number);
        r.n_fail = parse_int(at("n_fail"), "n_fail", number);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace bdsense
