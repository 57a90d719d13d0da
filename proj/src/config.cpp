#include "bdsense/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Both parsers accept the whole token or nothing.
std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

template <typename Int>
std::optional<Int> to_int(std::string_view s) {
    s = trim(s);
    Int v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Line numbers of section headers and keys, for diagnostics on input that
// already parsed as INI.
class LineIndex {
public:
    explicit LineIndex(std::string_view text) {
        std::string section;
        std::size_t number = 0;
        for (auto raw : split(text, '\n')) {
            ++number;
            const auto s = trim(raw);
            if (s.empty() || s.front() == '#' || s.front() == ';') continue;
            if (s.front() == '[') {
                section = std::string(trim(s.substr(1, s.find(']') - 1)));
                sections_.emplace(section, number);
                headers_.emplace_back(section, number);
            } else if (const auto eq = s.find('='); eq != std::string_view::npos) {
                keys_.emplace(section + "\n" + std::string(trim(s.substr(0, eq))), number);
            }
        }
    }

    [[nodiscard]] std::optional<std::size_t> section(const std::string& name) const { return find(sections_, name); }
    /// Every section header in file order, including empty ones the tree drops.
    [[nodiscard]] const std::vector<std::pair<std::string, std::size_t>>& headers() const { return headers_; }
    [[nodiscard]] std::size_t key(const std::string& section, const std::string& key) const {
        return find(keys_, section + "\n" + key).value_or(0);
    }

private:
    static std::optional<std::size_t> find(const std::map<std::string, std::size_t>& m, const std::string& k) {
        const auto it = m.find(k);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    std::map<std::string, std::size_t> sections_;
    std::map<std::string, std::size_t> keys_;
    std::vector<std::pair<std::string, std::size_t>> headers_;
};

class Parser {
public:
    Parser(std::string_view source, AppConfig& cfg) : source_(source), cfg_(cfg) {}

    void section(const std::string& name, std::size_t line) {
        number_ = line;
        section_ = name;
        if (!known_section(section_)) fail(fmt::format("unknown section [{}]", section_));
    }

    void entry(const std::string& key, const std::string& value, std::size_t line) {
        number_ = line;
        assign(key, value);
    }

    [[noreturn]] void fail_at(std::size_t line, const std::string& msg) {
        number_ = line;
        fail(msg);
    }

    void finish() {
        SweepConfig& sw = cfg_.sweep;
        MlGrid g = MlGrid::defaults(sw.system);
        for (const auto& [key, entry] : ml_) {
            number_ = entry.line;
            const auto& v = entry.value;
            if (key == "tau_points") g.tau.count = as_index(v);
            else if (key == "nu_points") g.nu.count = as_index(v);
            else if (key == "phi_points") g.phi.count = as_index(v);
            else if (key == "theta_points") g.theta.count = as_index(v);
            else if (key == "refinements") g.refinements = as_int(v);
            else if (key == "tau_lo_s") g.tau.lo = as_double(v);
            else if (key == "tau_hi_s") g.tau.hi = as_double(v);
            else if (key == "nu_lo_hz") g.nu.lo = as_double(v);
            else if (key == "nu_hi_hz") g.nu.hi = as_double(v);
            else if (key == "phi_lo_rad") g.phi.lo = as_double(v);
            else if (key == "phi_hi_rad") g.phi.hi = as_double(v);
            else if (key == "theta_lo_rad") g.theta.lo = as_double(v);
            else if (key == "theta_hi_rad") g.theta.hi = as_double(v);
        }
        sw.ml_grid = g;
        try {
            sw.system.validate();
            sw.bals.validate();
            sw.ml_grid.validate();
        } catch (const Error& e) {
            throw Error(Errc::configuration, fmt::format("{}: {}", source_, e.what()));
        }
    }

private:
    struct Deferred {
        std::size_t line = 0;
        std::string value;
    };

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(Errc::configuration, fmt::format("{}:{}: {}", source_, number_, msg));
    }

    static bool known_section(const std::string& s) {
        return s == "system" || s == "scene" || s == "bals" || s == "sweep" || s == "ml_grid";
    }

    double as_double(std::string_view v) const {
        const auto d = to_double(v);
        if (!d || std::isnan(*d)) fail(fmt::format("'{}' is not a number", v));
        return *d;
    }
    double as_finite(std::string_view v) const {
        const double d = as_double(v);
        if (!std::isfinite(d)) fail(fmt::format("'{}' must be finite", v));
        return d;
    }
    Index as_index(std::string_view v) const {
        const auto i = to_int<long long>(v);
        if (!i) fail(fmt::format("'{}' is not an integer", v));
        return static_cast<Index>(*i);
    }
    int as_int(std::string_view v) const {
        const auto i = to_int<int>(v);
        if (!i) fail(fmt::format("'{}' is not an integer", v));
        return *i;
    }

    void assign(const std::string& key, std::string_view v) {
        SweepConfig& sw = cfg_.sweep;
        SystemConfig& sys = sw.system;
        SceneRanges& sc = sw.ranges;
        BalsOptions& b = sw.bals;

        if (section_ == "system") {
            if (key == "l_y") sys.l_y = as_index(v);
            else if (key == "l_z") sys.l_z = as_index(v);
            else if (key == "n_y") sys.n_y = as_index(v);
            else if (key == "n_z") sys.n_z = as_index(v);
            else if (key == "m") sys.m = as_index(v);
            else if (key == "q") sys.q = as_index(v);
            else if (key == "t") sys.t = as_index(v);
            else if (key == "delta_f_hz") sys.delta_f_hz = as_finite(v);
            else if (key == "carrier_hz") sys.carrier_hz = as_finite(v);
            else if (key == "group_sizes") {
                sys.group_sizes.clear();
                if (!v.empty())
                    for (auto item : split(v, ',')) sys.group_sizes.push_back(as_index(item));
            } else unknown(key);
        } else if (section_ == "scene") {
            if (key == "d_st_ris_min_m") sc.d_st_ris_min_m = as_finite(v);
            else if (key == "d_st_ris_max_m") sc.d_st_ris_max_m = as_finite(v);
            else if (key == "d_ris_target_min_m") sc.d_ris_target_min_m = as_finite(v);
            else if (key == "d_ris_target_max_m") sc.d_ris_target_max_m = as_finite(v);
            else if (key == "velocity_min_mps") sc.velocity_min_mps = as_finite(v);
            else if (key == "velocity_max_mps") sc.velocity_max_mps = as_finite(v);
            else if (key == "rcs_m2") sc.rcs_m2 = as_finite(v);
            else if (key == "snr_db") cfg_.scene_snr_db = as_double(v);
            else unknown(key);
        } else if (section_ == "bals") {
            if (key == "i_max") b.i_max = as_int(v);
            else if (key == "delta") b.delta = as_finite(v);
            else if (key == "pinv_tol") b.pinv_tol = as_finite(v);
            else if (key == "gain_rule") {
                if (v == "ls") b.gain_rule = GainRule::least_squares;
                else if (v == "ratio") b.gain_rule = GainRule::masked_division;
                else fail(fmt::format("gain_rule must be ls or ratio, got '{}'", v));
            } else unknown(key);
        } else if (section_ == "sweep") {
            if (key == "snr_db") {
                try {
                    sw.snr_db = v.empty() ? std::vector<double>{} : parse_snr_list(v);
                } catch (const Error& e) {
                    fail(e.what());
                }
            } else if (key == "trials") sw.trials = as_int(v);
            else if (key == "seed") {
                const auto s = to_int<std::uint64_t>(v);
                if (!s) fail(fmt::format("'{}' is not an unsigned integer", v));
                sw.seed = *s;
            } else if (key == "workers") cfg_.workers = as_int(v);
            else if (key == "methods") {
                sw.methods.clear();
                if (!v.empty())
                    for (auto item : split(v, ',')) {
                        try {
                            sw.methods.push_back(parse_method(item));
                        } catch (const Error& e) {
                            fail(e.what());
                        }
                    }
            } else if (key == "kf_split") {
                if (v == "angle") sw.kf_split = KfSplit::angle;
                else if (v == "nested") sw.kf_split = KfSplit::nested;
                else fail(fmt::format("kf_split must be angle or nested, got '{}'", v));
            } else unknown(key);
        } else if (section_ == "ml_grid") {
            static const std::set<std::string> keys{"tau_points", "nu_points",  "phi_points", "theta_points",
                                                    "refinements", "tau_lo_s",  "tau_hi_s",   "nu_lo_hz",
                                                    "nu_hi_hz",   "phi_lo_rad", "phi_hi_rad", "theta_lo_rad",
                                                    "theta_hi_rad"};
            if (!keys.contains(key)) unknown(key);
            // Range defaults depend on [system], which may come later in the file.
            ml_[key] = {number_, std::string(v)};
        }
    }

    [[noreturn]] void unknown(const std::string& key) const {
        fail(fmt::format("unknown key '{}' in [{}]", key, section_));
    }

    std::string source_;
    AppConfig& cfg_;
    std::string section_;
    std::size_t number_ = 0;
    std::map<std::string, Deferred> ml_;
};

}  // namespace

AppConfig default_config() {
    AppConfig cfg;
    cfg.sweep.snr_db = parse_snr_list("-10:5:30");
    cfg.sweep.ml_grid = MlGrid::defaults(cfg.sweep.system);
    return cfg;
}

std::vector<double> parse_snr_list(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw Error(Errc::configuration, "SNR list is empty");
    const auto number = [](std::string_view s) {
        const auto d = to_double(s);
        if (!d || std::isnan(*d)) throw Error(Errc::configuration, fmt::format("'{}' is not an SNR value", s));
        return *d;
    };
    if (text.find(':') != std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw Error(Errc::configuration, "an SNR range is written lo:step:hi");
        const double lo = number(parts[0]);
        const double step = number(parts[1]);
        const double hi = number(parts[2]);
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(step > 0.0) || !std::isfinite(step) || hi < lo)
            throw Error(Errc::configuration, fmt::format("invalid SNR range '{}'", text));
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long k = 0; k <= count; ++k) out.push_back(lo + static_cast<double>(k) * step);
        return out;
    }
    std::vector<double> out;
    for (auto item : split(text, ',')) out.push_back(number(item));
    return out;
}

AppConfig parse_config(std::string_view text, std::string_view source) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(Errc::configuration, fmt::format("{}:{}: {}", source, e.line(), e.message()));
    }

    const LineIndex lines(text);
    AppConfig cfg = default_config();
    Parser p(source, cfg);
    for (const auto& [name, line] : lines.headers()) p.section(name, line);
    for (const auto& [name, body] : tree) {
        const auto header = lines.section(name);
        if (!header) p.fail_at(lines.key("", name), fmt::format("key '{}' outside any section", name));
        p.section(name, *header);
        for (const auto& [key, node] : body) p.entry(key, node.data(), lines.key(name, key));
    }
    p.finish();
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, fmt::format("cannot read config file {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error(Errc::io, fmt::format("error while reading {}", path.string()));
    return parse_config(buf.str(), path.string());
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed) {
    if (flag) return *flag;
    if (const char* env = std::getenv("BDSENSE_SEED"); env != nullptr && *env != '\0') {
        const auto v = to_int<std::uint64_t>(env);
        if (!v) throw Error(Errc::configuration, fmt::format("BDSENSE_SEED='{}' is not an unsigned integer", env));
        return *v;
    }
    return config_seed;
}

}  // namespace bdsense
