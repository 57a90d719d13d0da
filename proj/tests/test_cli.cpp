#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "bdsense/commands.hpp"
#include "bdsense/config.hpp"
#include "bdsense/dataset.hpp"
#include "bdsense/error.hpp"
#include "bdsense/results_csv.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace bdsense {
namespace {

// Fresh scratch directory per test.
class Scratch : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / fmt_name(info->test_suite_name(), info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    static std::string fmt_name(const char* suite, const char* name) {
        return std::string("bdsense_") + suite + "_" + name + "_" + std::to_string(::getpid());
    }

    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = dir / name;
        std::ofstream(p) << text;
        return p;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    }

    fs::path dir;
    std::ostringstream out, err;
};

TEST(Config, DefaultsAreTableOne) {
    const AppConfig c = default_config();
    const SystemConfig& s = c.sweep.system;
    EXPECT_EQ(s.n_y, 2);
    EXPECT_EQ(s.n_z, 2);
    EXPECT_EQ(s.l_y, 2);
    EXPECT_EQ(s.l_z, 2);
    EXPECT_EQ(s.m, 4);
    EXPECT_EQ(s.q, 4);
    EXPECT_EQ(s.t, 256);
    EXPECT_EQ(s.delta_f_hz, 120e3);
    EXPECT_EQ(s.carrier_hz, 28e9);
    EXPECT_EQ(c.sweep.bals.i_max, 500);
    EXPECT_EQ(c.sweep.bals.delta, 1e-6);
    EXPECT_EQ(c.sweep.trials, 200);
    EXPECT_EQ(c.sweep.snr_db, (std::vector<double>{-10, -5, 0, 5, 10, 15, 20, 25, 30}));
    EXPECT_EQ(c.sweep.methods, (std::vector<Method>{Method::ntfe, Method::kf, Method::ls}));
}

TEST(Config, ParsesEverySection) {
    const AppConfig c = parse_config(R"(
# comment
[system]
t = 300
group_sizes = 4
[scene]
; whole-line comment
snr_db = inf
velocity_max_mps = 30
[bals]
i_max = 40
gain_rule = ratio
[sweep]
snr_db = 0:10:20
trials = 7
seed = 99
methods = ls, ml
workers = 3
kf_split = nested
[ml_grid]
tau_points = 10
refinements = 0
)");
    EXPECT_EQ(c.sweep.system.t, 300);
    EXPECT_EQ(c.sweep.system.group_sizes, (std::vector<Index>{4}));
    EXPECT_TRUE(std::isinf(c.scene_snr_db));
    EXPECT_EQ(c.sweep.ranges.velocity_max_mps, 30.0);
    EXPECT_EQ(c.sweep.bals.i_max, 40);
    EXPECT_EQ(c.sweep.bals.gain_rule, GainRule::masked_division);
    EXPECT_EQ(c.sweep.snr_db, (std::vector<double>{0, 10, 20}));
    EXPECT_EQ(c.sweep.trials, 7);
    EXPECT_EQ(c.sweep.seed, 99u);
    EXPECT_EQ(c.sweep.methods, (std::vector<Method>{Method::ls, Method::ml}));
    EXPECT_EQ(c.workers, 3);
    EXPECT_EQ(c.sweep.kf_split, KfSplit::nested);
    EXPECT_EQ(c.sweep.ml_grid.tau.count, 10);
    EXPECT_EQ(c.sweep.ml_grid.phi.count, 32);
    EXPECT_EQ(c.sweep.ml_grid.refinements, 0);
}

TEST(Config, MlGridFollowsSystem) {
    const AppConfig c = parse_config("[ml_grid]\nnu_points = 8\n[system]\ndelta_f_hz = 60e3\n");
    EXPECT_DOUBLE_EQ(c.sweep.ml_grid.tau.hi, 1.0 / 60e3);
    EXPECT_EQ(c.sweep.ml_grid.nu.count, 8);
}

void expect_config_error(const std::string& text, const std::string& fragment) {
    try {
        parse_config(text, "cfg.ini");
        ADD_FAILURE() << "accepted: " << text;
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::configuration);
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

TEST(Config, Rejections) {
    expect_config_error("[system]\nbogus = 1\n", "cfg.ini:2:");
    expect_config_error("[system]\nbogus = 1\n", "unknown key");
    expect_config_error("[nowhere]\n", "cfg.ini:1:");
    expect_config_error("[system]\nt = 3\nt = 4\n", "cfg.ini:3:");
    expect_config_error("[system]\nt = many\n", "cfg.ini:2:");
    expect_config_error("t = 3\n", "cfg.ini:1:");
    expect_config_error("[sweep]\nmethods = ntfe, music\n", "cfg.ini:2:");
    expect_config_error("[bals]\ngain_rule = median\n", "cfg.ini:2:");
    expect_config_error("[system]\nt\n", "cfg.ini:2:");
}

TEST(Config, SnrLists) {
    EXPECT_EQ(parse_snr_list("-10:5:30").size(), 9u);
    EXPECT_EQ(parse_snr_list("10, 20"), (std::vector<double>{10, 20}));
    EXPECT_EQ(parse_snr_list("15:5:25"), (std::vector<double>{15, 20, 25}));
    const auto inf = parse_snr_list("inf");
    ASSERT_EQ(inf.size(), 1u);
    EXPECT_TRUE(std::isinf(inf[0]) && inf[0] > 0);
    EXPECT_BDS_ERROR(parse_snr_list(""), Errc::configuration);
    EXPECT_BDS_ERROR(parse_snr_list("1:0:5"), Errc::configuration);
    EXPECT_BDS_ERROR(parse_snr_list("5:1:1"), Errc::configuration);
    EXPECT_BDS_ERROR(parse_snr_list("ten"), Errc::configuration);
}

TEST(Config, SeedPrecedence) {
    ::unsetenv("BDSENSE_SEED");
    EXPECT_EQ(resolve_seed(std::nullopt, 7), 7u);
    ::setenv("BDSENSE_SEED", "42", 1);
    EXPECT_EQ(resolve_seed(std::nullopt, 7), 42u);
    EXPECT_EQ(resolve_seed(11, 7), 11u);
    ::setenv("BDSENSE_SEED", "x1", 1);
    EXPECT_BDS_ERROR(resolve_seed(std::nullopt, 7), Errc::configuration);
    ::unsetenv("BDSENSE_SEED");
}

TEST_F(Scratch, LoadConfigMissingFile) { EXPECT_BDS_ERROR(load_config(dir / "none.ini"), Errc::io); }

Dataset sample_dataset(double snr) {
    const fixtures::Problem p = fixtures::random_problem(SystemConfig{}, 3, snr);
    Dataset d;
    d.system = p.cfg;
    d.system.group_sizes = {4};
    d.truth = p.truth;
    d.seed = 3;
    d.snr_db = snr;
    d.realized_snr_db = snr;
    d.noiseless = std::isinf(snr);
    d.codebook = p.codebook;
    d.pilots = p.pilots;
    d.g = p.g;
    d.y = p.y;
    return d;
}

TEST(Dataset, BitExactRoundTrip) {
    const Dataset d = sample_dataset(12.5);
    std::stringstream s;
    save_dataset(d, s);
    const std::string bytes = s.str();
    EXPECT_EQ(bytes.substr(0, 8), std::string("BDSDSET\0", 8));
    const Dataset back = load_dataset(s);
    EXPECT_TRUE(back == d);
    std::stringstream again;
    save_dataset(back, again);
    EXPECT_EQ(again.str(), bytes);
}

TEST(Dataset, NoiselessFlagSurvives) {
    const Dataset d = sample_dataset(INFINITY);
    std::stringstream s;
    save_dataset(d, s);
    const Dataset back = load_dataset(s);
    EXPECT_TRUE(back.noiseless);
    EXPECT_TRUE(std::isinf(back.realized_snr_db));
}

TEST(Dataset, MalformedContainer) {
    std::stringstream bad("NOTADATASET");
    EXPECT_BDS_ERROR(load_dataset(bad), Errc::io);
    const Dataset d = sample_dataset(10.0);
    std::stringstream s;
    save_dataset(d, s);
    std::stringstream cut(s.str().substr(0, s.str().size() / 2));
    EXPECT_BDS_ERROR(load_dataset(cut), Errc::io);
    EXPECT_BDS_ERROR(load_dataset(fs::path("/nonexistent/dir/x.bds")), Errc::io);
}

TEST(Csv, NumberFormatting) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-20.0), "-20");
    EXPECT_EQ(format_number(NAN), "nan");
    EXPECT_EQ(format_number(INFINITY), "inf");
    EXPECT_EQ(format_number(-INFINITY), "-inf");
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Csv, TrialHeader) {
    std::ostringstream s;
    write_trial_header(s);
    EXPECT_EQ(s.str(),
              "method,snr_db,trial,seed,tau_true,tau_est,nu_true,nu_est,phi_true,phi_est,theta_true,theta_est,"
              "alpha_err_rel,nmse_heff,iters_s1,iters_s2,status\n");
}

TEST(Csv, AggregateRoundTripAnyColumnOrder) {
    AggregateRow r;
    r.method = Method::kf;
    r.snr_db = 20;
    r.nmse_heff = 0.01;
    r.nmse_heff_db = -20;
    r.rmse_tau_norm = 1.5e-3;
    r.rmse_nu_norm = NAN;
    r.rmse_angle_rad = 0.25;
    r.rmse_alpha = 0.125;
    r.n_ok = 199;
    r.n_fail = 1;
    std::ostringstream s;
    write_aggregate_csv(s, {r});
    EXPECT_EQ(s.str(),
              "method,snr_db,nmse_heff_db,rmse_tau_norm,rmse_nu_norm,rmse_angle_rad,rmse_alpha,n_ok,n_fail\n"
              "kf,20,-20,0.0015,nan,0.25,0.125,199,1\n");
    std::istringstream in(s.str());
    const auto back = read_aggregate_csv(in);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].method, Method::kf);
    EXPECT_EQ(back[0].n_ok, 199);
    EXPECT_NEAR(back[0].nmse_heff, 0.01, 1e-15);
    EXPECT_TRUE(std::isnan(back[0].rmse_nu_norm));

    std::istringstream swapped(
        "n_fail,n_ok,rmse_alpha,rmse_angle_rad,rmse_nu_norm,rmse_tau_norm,nmse_heff_db,snr_db,method,extra\n"
        "1,199,0.125,0.25,nan,0.0015,-20,20,kf,x\n");
    const auto b2 = read_aggregate_csv(swapped);
    ASSERT_EQ(b2.size(), 1u);
    EXPECT_EQ(b2[0].rmse_tau_norm, 1.5e-3);
    EXPECT_EQ(b2[0].snr_db, 20);
}

TEST(Csv, MissingColumnNamed) {
    std::istringstream in("method,snr_db,nmse_heff_db,rmse_tau_norm,rmse_nu_norm,rmse_alpha,n_ok,n_fail\n");
    try {
        read_aggregate_csv(in);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::configuration);
        EXPECT_NE(std::string(e.what()).find("rmse_angle_rad"), std::string::npos);
    }
}

TEST(Csv, MalformedRows) {
    const std::string head = "method,snr_db,nmse_heff_db,rmse_tau_norm,rmse_nu_norm,rmse_angle_rad,rmse_alpha,n_ok,n_fail\n";
    std::istringstream short_row(head + "ntfe,20,-3\n");
    EXPECT_BDS_ERROR(read_aggregate_csv(short_row), Errc::configuration);
    std::istringstream bad_number(head + "ntfe,20,abc,0,0,0,0,1,0\n");
    EXPECT_BDS_ERROR(read_aggregate_csv(bad_number), Errc::configuration);
    std::istringstream bad_method(head + "svd,20,1,0,0,0,0,1,0\n");
    EXPECT_BDS_ERROR(read_aggregate_csv(bad_method), Errc::configuration);
}

TEST_F(Scratch, CheckDefaultPasses) {
    EXPECT_EQ(cmd_check({}, out, err), kExitOk);
    EXPECT_NE(out.str().find("all checks pass"), std::string::npos);
}

TEST_F(Scratch, CheckFlagsLsAtEightSlots) {
    CommandOptions o;
    o.config = write("c.ini", "[system]\nt = 8\n[sweep]\nmethods = ls\n");
    EXPECT_EQ(cmd_check(o, out, err), kExitCheckFailed);
    const std::string text = out.str();
    const auto pos = text.find("T >= N^4");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_NE(text.find("FAIL", pos), std::string::npos);
}

TEST_F(Scratch, CheckUnknownKey) {
    CommandOptions o;
    o.config = write("c.ini", "[system]\nfoo = 1\n");
    EXPECT_EQ(cmd_check(o, out, err), kExitUsage);
    EXPECT_NE(err.str().find("c.ini:2:"), std::string::npos);
}

TEST_F(Scratch, SimulateSeedsDiffer) {
    CommandOptions a;
    a.out = dir / "a.bds";
    a.seed = 1;
    CommandOptions b = a;
    b.out = dir / "b.bds";
    b.seed = 2;
    ASSERT_EQ(cmd_simulate(a, out, err), kExitOk);
    ASSERT_EQ(cmd_simulate(b, out, err), kExitOk);
    EXPECT_NE(load_dataset(a.out).y, load_dataset(b.out).y);
    CommandOptions a2 = a;
    a2.out = dir / "a2.bds";
    ASSERT_EQ(cmd_simulate(a2, out, err), kExitOk);
    EXPECT_EQ(slurp(a.out), slurp(a2.out));
}

TEST_F(Scratch, SimulateNoiseless) {
    CommandOptions o;
    o.out = dir / "n.bds";
    o.snr = "inf";
    ASSERT_EQ(cmd_simulate(o, out, err), kExitOk);
    const Dataset d = load_dataset(o.out);
    EXPECT_TRUE(d.noiseless);
    EXPECT_TRUE(std::isinf(d.realized_snr_db));
}

TEST_F(Scratch, SimulateUnwritable) {
    CommandOptions o;
    o.out = dir / "missing" / "deeper" / "x.bds";
    EXPECT_EQ(cmd_simulate(o, out, err), kExitIo);
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> f;
    std::istringstream in(line);
    for (std::string x; std::getline(in, x, ',');) f.push_back(x);
    return f;
}

TEST_F(Scratch, EstimateNoiselessNtfeAndLs) {
    CommandOptions sim;
    sim.out = dir / "n.bds";
    sim.snr = "inf";
    sim.seed = 8;
    ASSERT_EQ(cmd_simulate(sim, out, err), kExitOk);

    CommandOptions est;
    est.input = sim.out;
    est.out = dir / "rows.csv";
    est.method = "ntfe";
    ASSERT_EQ(cmd_estimate(est, out, err), kExitOk) << err.str();
    est.method = "ls";
    ASSERT_EQ(cmd_estimate(est, out, err), kExitOk) << err.str();

    const auto lines = csv_lines(slurp(est.out));
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0].rfind("method,snr_db", 0), 0u);
    const auto n = split(lines[1]);
    ASSERT_EQ(n.size(), 17u);
    EXPECT_EQ(n[0], "ntfe");
    EXPECT_EQ(n[16], "ok");
    for (int k : {4, 6, 8, 10}) EXPECT_LE(fixtures::rel(std::stod(n[k + 1]), std::stod(n[k])), 1e-6) << k;
    EXPECT_LE(std::stod(n[12]), 1e-6);
    const auto l = split(lines[2]);
    EXPECT_EQ(l[0], "ls");
    EXPECT_LE(std::stod(l[13]), 1e-10);
    EXPECT_EQ(l[5], "nan");
}

TEST_F(Scratch, EstimateUnknownMethod) {
    CommandOptions sim;
    sim.out = dir / "n.bds";
    ASSERT_EQ(cmd_simulate(sim, out, err), kExitOk);
    CommandOptions est;
    est.input = sim.out;
    est.method = "music";
    EXPECT_EQ(cmd_estimate(est, out, err), kExitUsage);
}

TEST_F(Scratch, EstimateBlockedMethodIsAResult) {
    CommandOptions sim;
    sim.config = write("c.ini", "[system]\nt = 64\n");
    sim.out = dir / "short.bds";
    ASSERT_EQ(cmd_simulate(sim, out, err), kExitOk);
    CommandOptions est;
    est.input = sim.out;
    est.method = "ls";
    est.out = dir / "rows.csv";
    EXPECT_EQ(cmd_estimate(est, out, err), kExitOk);
    const auto lines = csv_lines(slurp(est.out));
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(split(lines[1]).back(), "identifiability");
}

TEST_F(Scratch, SweepEmptySnrList) {
    CommandOptions o;
    o.out = dir / "s";
    o.snr = "";
    EXPECT_EQ(cmd_sweep(o, out, err), kExitUsage);
}

TEST_F(Scratch, SweepWorkerCountByteIdentical) {
    CommandOptions o;
    o.config = write("c.ini", "[sweep]\nsnr_db = 10, 20\ntrials = 2\nseed = 77\n");
    o.quiet = true;
    o.out = dir / "w1";
    o.workers = 1;
    ASSERT_EQ(cmd_sweep(o, out, err), kExitOk) << err.str();
    o.out = dir / "w8";
    o.workers = 8;
    ASSERT_EQ(cmd_sweep(o, out, err), kExitOk) << err.str();
    EXPECT_EQ(slurp(dir / "w1" / "trials.csv"), slurp(dir / "w8" / "trials.csv"));
    EXPECT_EQ(slurp(dir / "w1" / "aggregate.csv"), slurp(dir / "w8" / "aggregate.csv"));
    EXPECT_EQ(csv_lines(slurp(dir / "w1" / "trials.csv")).size(), 1u + 2 * 2 * 3);
    EXPECT_EQ(csv_lines(slurp(dir / "w1" / "aggregate.csv")).size(), 1u + 3 * 2);
}

TEST_F(Scratch, ReportOneRow) {
    CommandOptions o;
    o.input = write("agg.csv",
                    "method,snr_db,nmse_heff_db,rmse_tau_norm,rmse_nu_norm,rmse_angle_rad,rmse_alpha,n_ok,n_fail\n"
                    "ntfe,20,-20,0.001,0.002,0.003,0.004,200,0\n");
    ASSERT_EQ(cmd_report(o, out, err), kExitOk);
    const auto lines = csv_lines(out.str());
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_NE(lines[1].find("-20.00"), std::string::npos);
}

TEST_F(Scratch, ReportMissingColumn) {
    CommandOptions o;
    o.input = write("agg.csv", "method,snr_db,nmse_heff_db\nntfe,20,-20\n");
    EXPECT_EQ(cmd_report(o, out, err), kExitUsage);
    EXPECT_NE(err.str().find("rmse_tau_norm"), std::string::npos);
}

TEST_F(Scratch, ReportMissingFile) {
    CommandOptions o;
    o.input = dir / "nope.csv";
    EXPECT_EQ(cmd_report(o, out, err), kExitIo);
}

}  // namespace
}  // namespace bdsense
