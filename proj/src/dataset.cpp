#include "bdsense/dataset.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "bdsense/error.hpp"

namespace bdsense {

namespace {

constexpr std::array<char, 8> kMagic{'B', 'D', 'S', 'D', 'S', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxNameLength = 256;
constexpr std::uint32_t kMaxRank = 16;

enum Kind : std::uint8_t { kF64 = 1, kC128 = 2, kU64 = 3 };

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) {
        std::array<unsigned char, 4> b{};
        for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b.data(), b.size());
    }
    void u64(std::uint64_t v) {
        std::array<unsigned char, 8> b{};
        for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b.data(), b.size());
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void header(const std::string& name, Kind kind, const std::vector<std::uint64_t>& extents) {
        u32(static_cast<std::uint32_t>(name.size()));
        bytes(name.data(), name.size());
        u8(kind);
        u32(static_cast<std::uint32_t>(extents.size()));
        for (auto e : extents) u64(e);
    }
    void f64_record(const std::string& name, const std::vector<double>& v) {
        header(name, kF64, {v.size()});
        for (double x : v) f64(x);
    }
    void u64_record(const std::string& name, const std::vector<std::uint64_t>& v) {
        header(name, kU64, {v.size()});
        for (auto x : v) u64(x);
    }
    void c128_record(const std::string& name, const Shape& shape, std::span<const cd> data) {
        std::vector<std::uint64_t> ext(shape.begin(), shape.end());
        header(name, kC128, ext);
        for (const cd& x : data) {
            f64(x.real());
            f64(x.imag());
        }
    }

private:
    std::ostream& out_;
};

struct Record {
    Kind kind = kF64;
    Shape shape;
    std::vector<double> f64;  // real payload, or interleaved re/im
    std::vector<std::uint64_t> u64;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw Error(Errc::io, "dataset is truncated");
    }
    std::uint8_t u8() {
        std::uint8_t v = 0;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::array<unsigned char, 4> b{};
        bytes(b.data(), b.size());
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    }
    std::uint64_t u64() {
        std::array<unsigned char, 8> b{};
        bytes(b.data(), b.size());
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }

    std::pair<std::string, Record> record() {
        const std::uint32_t len = u32();
        if (len == 0 || len > kMaxNameLength) throw Error(Errc::io, "dataset record has an invalid name length");
        std::string name(len, '\0');
        bytes(name.data(), len);
        Record r;
        const std::uint8_t kind = u8();
        if (kind != kF64 && kind != kC128 && kind != kU64)
            throw Error(Errc::io, fmt::format("dataset record '{}' has unknown kind {}", name, kind));
        r.kind = static_cast<Kind>(kind);
        const std::uint32_t rank = u32();
        if (rank > kMaxRank) throw Error(Errc::io, fmt::format("dataset record '{}' has rank {}", name, rank));
        std::uint64_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint64_t e = u64();
            if (e > (std::uint64_t{1} << 32) || (e > 0 && count > (std::uint64_t{1} << 34) / e))
                throw Error(Errc::io, fmt::format("dataset record '{}' is implausibly large", name));
            count *= e;
            r.shape.push_back(static_cast<Index>(e));
        }
        if (r.kind == kU64) {
            r.u64.resize(count);
            for (auto& v : r.u64) v = u64();
        } else {
            r.f64.resize(r.kind == kC128 ? 2 * count : count);
            for (auto& v : r.f64) v = f64();
        }
        return {std::move(name), std::move(r)};
    }

private:
    std::istream& in_;
};

const Record& require(const std::map<std::string, Record>& recs, const std::string& name, Kind kind,
                      std::size_t rank) {
    const auto it = recs.find(name);
    if (it == recs.end()) throw Error(Errc::io, fmt::format("dataset has no '{}' record", name));
    if (it->second.kind != kind || it->second.shape.size() != rank)
        throw Error(Errc::io, fmt::format("dataset record '{}' has the wrong type", name));
    return it->second;
}

std::vector<double> require_f64(const std::map<std::string, Record>& recs, const std::string& name,
                                std::size_t count) {
    const Record& r = require(recs, name, kF64, 1);
    if (r.f64.size() != count)
        throw Error(Errc::io, fmt::format("dataset record '{}' has {} values, expected {}", name, r.f64.size(), count));
    return r.f64;
}

ComplexTensor to_tensor(const Record& r) {
    std::vector<cd> data(r.f64.size() / 2);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = {r.f64[2 * i], r.f64[2 * i + 1]};
    return ComplexTensor(r.shape, std::move(data));
}

}  // namespace

bool operator==(const Dataset& a, const Dataset& b) {
    const auto same_system = [](const SystemConfig& x, const SystemConfig& y) {
        return x.l_y == y.l_y && x.l_z == y.l_z && x.n_y == y.n_y && x.n_z == y.n_z && x.group_sizes == y.group_sizes &&
               x.m == y.m && x.q == y.q && x.t == y.t && x.delta_f_hz == y.delta_f_hz && x.carrier_hz == y.carrier_hz;
    };
    const auto same_truth = [](const SceneTruth& x, const SceneTruth& y) {
        return x.tau_s == y.tau_s && x.nu_hz == y.nu_hz && x.phi_ris_d == y.phi_ris_d &&
               x.theta_ris_d == y.theta_ris_d && x.phi_st == y.phi_st && x.theta_st == y.theta_st &&
               x.phi_ris_a == y.phi_ris_a && x.theta_ris_a == y.theta_ris_a && x.alpha == y.alpha;
    };
    if (a.codebook.slots.size() != b.codebook.slots.size()) return false;
    for (std::size_t i = 0; i < a.codebook.slots.size(); ++i)
        if (a.codebook.slots[i] != b.codebook.slots[i]) return false;
    return same_system(a.system, b.system) && same_truth(a.truth, b.truth) && a.seed == b.seed &&
           a.snr_db == b.snr_db && a.realized_snr_db == b.realized_snr_db && a.noiseless == b.noiseless &&
           a.codebook.selection == b.codebook.selection && a.pilots.x == b.pilots.x && a.g == b.g && a.y == b.y;
}

void save_dataset(const Dataset& d, std::ostream& out) {
    Writer w(out);
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kVersion);
    w.u32(9);
    const SystemConfig& s = d.system;
    w.f64_record("system", {static_cast<double>(s.l_y), static_cast<double>(s.l_z), static_cast<double>(s.n_y),
                            static_cast<double>(s.n_z), static_cast<double>(s.m), static_cast<double>(s.q),
                            static_cast<double>(s.t), s.delta_f_hz, s.carrier_hz});
    w.u64_record("group_sizes", std::vector<std::uint64_t>(s.group_sizes.begin(), s.group_sizes.end()));
    const SceneTruth& t = d.truth;
    w.f64_record("truth", {t.tau_s, t.nu_hz, t.phi_ris_d, t.theta_ris_d, t.phi_st, t.theta_st, t.phi_ris_a,
                           t.theta_ris_a, t.alpha.real(), t.alpha.imag()});
    w.u64_record("seed", {d.seed});
    w.f64_record("snr", {d.snr_db, d.realized_snr_db, d.noiseless ? 1.0 : 0.0});

    const Index n = d.system.ris_elements();
    std::vector<cd> slots;
    slots.reserve(static_cast<std::size_t>(n * n) * d.codebook.slots.size());
    for (const auto& st : d.codebook.slots) slots.insert(slots.end(), st.data(), st.data() + st.size());
    w.c128_record("codebook", {n, n, static_cast<Index>(d.codebook.slots.size())}, slots);
    w.c128_record("pilots", d.pilots.x.shape(), d.pilots.x.data());
    w.c128_record("channel", {d.g.rows(), d.g.cols()}, std::span<const cd>(d.g.data(), d.g.size()));
    w.c128_record("y", d.y.shape(), d.y.data());
    if (!out) throw Error(Errc::io, "failed to write the dataset");
}

Dataset load_dataset(std::istream& in) {
    Reader r(in);
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kMagic) throw Error(Errc::io, "not a dataset file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw Error(Errc::io, fmt::format("unsupported dataset version {}", version));
    const std::uint32_t count = r.u32();
    std::map<std::string, Record> recs;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, rec] = r.record();
        if (!recs.emplace(name, std::move(rec)).second)
            throw Error(Errc::io, fmt::format("dataset record '{}' appears twice", name));
    }

    Dataset d;
    const auto sys = require_f64(recs, "system", 9);
    SystemConfig& s = d.system;
    s.l_y = static_cast<Index>(sys[0]);
    s.l_z = static_cast<Index>(sys[1]);
    s.n_y = static_cast<Index>(sys[2]);
    s.n_z = static_cast<Index>(sys[3]);
    s.m = static_cast<Index>(sys[4]);
    s.q = static_cast<Index>(sys[5]);
    s.t = static_cast<Index>(sys[6]);
    s.delta_f_hz = sys[7];
    s.carrier_hz = sys[8];
    for (auto g : require(recs, "group_sizes", kU64, 1).u64) s.group_sizes.push_back(static_cast<Index>(g));
    try {
        s.validate();
    } catch (const Error& e) {
        throw Error(Errc::io, fmt::format("dataset system record is invalid: {}", e.what()));
    }

    const auto t = require_f64(recs, "truth", 10);
    d.truth = {t[0], t[1], t[2], t[3], t[4], t[5], t[6], t[7], cd{t[8], t[9]}};
    const Record& seed = require(recs, "seed", kU64, 1);
    if (seed.u64.size() != 1) throw Error(Errc::io, "dataset seed record must hold one value");
    d.seed = seed.u64[0];
    const auto snr = require_f64(recs, "snr", 3);
    d.snr_db = snr[0];
    d.realized_snr_db = snr[1];
    d.noiseless = snr[2] != 0.0;

    const Index n = s.ris_elements();
    const Index l = s.st_antennas();
    const Record& cb = require(recs, "codebook", kC128, 3);
    if (cb.shape != Shape{n, n, s.t}) throw Error(Errc::io, "dataset codebook does not match the system");
    const ComplexTensor slots = to_tensor(cb);
    d.codebook.selection.resize(s.t, n * n * n * n);
    for (Index k = 0; k < s.t; ++k) {
        d.codebook.slots.push_back(Eigen::Map<const ComplexMatrix>(slots.data().data() + k * n * n, n, n));
        d.codebook.selection.row(k) = selection_row(d.codebook.slots.back());
    }
    const Record& pilots = require(recs, "pilots", kC128, 3);
    if (pilots.shape != Shape{l, s.m, s.q}) throw Error(Errc::io, "dataset pilots do not match the system");
    d.pilots.x = to_tensor(pilots);
    const Record& g = require(recs, "channel", kC128, 2);
    if (g.shape != Shape{l, n}) throw Error(Errc::io, "dataset channel does not match the system");
    d.g = to_tensor(g).as_matrix();
    const Record& y = require(recs, "y", kC128, 3);
    if (y.shape != Shape{l, s.m * s.q, s.t}) throw Error(Errc::io, "dataset tensor does not match the system");
    d.y = to_tensor(y);
    return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, fmt::format("cannot open {} for writing", path.string()));
    save_dataset(d, out);
    out.close();
    if (!out) throw Error(Errc::io, fmt::format("failed to write {}", path.string()));
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, fmt::format("cannot open {}", path.string()));
    return load_dataset(in);
}

}  // namespace bdsense
