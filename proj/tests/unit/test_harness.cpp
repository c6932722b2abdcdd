#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "levylab/core/error.hpp"
#include "levylab/harness/harness.hpp"
#include "levylab/harness/report.hpp"

using namespace levylab;
using namespace levylab::harness;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("levylab_harness_" + name);
    std::filesystem::remove_all(p);
    return p.string();
}

ExperimentConfig experiment(Kind kind, const std::string& text, const std::string& dir, std::uint64_t seed = 1) {
    ExperimentConfig e;
    e.kind = kind;
    e.raw = Config::parse(text);
    e.thresholds = Thresholds::from(e.raw);
    e.out_dir = dir;
    e.seed = seed;
    return e;
}

const Check& find_check(const std::vector<Check>& checks, const std::string& prefix) {
    for (const auto& c : checks)
        if (c.name.rfind(prefix, 0) == 0) return c;
    FAIL("no check named " << prefix);
    return checks.front();
}

} // namespace

TEST_CASE("regime classification") {
    CHECK(classify_regime(1.5, 0.0).regime == Regime::subcritical);
    CHECK(classify_regime(1.0, 0.0).regime == Regime::critical);
    const auto r = classify_regime(0.5, 0.4);
    CHECK(r.regime == Regime::supercritical);
    CHECK_FALSE(r.balance);
    CHECK(classify_regime(0.5, 0.5).balance);
    CHECK(regime_name(Regime::critical) == "critical");
    CHECK_THROWS_AS(classify_regime(2.0, 0.5), Error);
    CHECK_THROWS_AS(classify_regime(0.0, 0.5), Error);
    CHECK_THROWS_AS(classify_regime(0.5, 1.1), Error);
    CHECK_THROWS_AS(classify_regime(0.5, -0.1), Error);
}

TEST_CASE("config parsing") {
    const auto c = Config::parse(R"(# top comment
seed = 4
[model]
alpha = 0.75   # trailing comment
measure = "isotropic"
[sim]
x0 = [0.5, -1e-3]
parallel = true
)");
    CHECK(c.number("seed", 0) == 4.0);
    CHECK(c.number("model.alpha") == 0.75);
    CHECK(c.text("model.measure", "") == "isotropic");
    CHECK(c.array("sim.x0", {}) == std::vector<double>{0.5, -1e-3});
    CHECK(c.flag("sim.parallel", false));
    CHECK(c.number("model.missing", 7.0) == 7.0);
    CHECK_THROWS_AS(c.number("model.missing"), Error);
    CHECK_THROWS_AS(c.number("model.measure", 0.0), Error);
    CHECK_THROWS_AS(c.text("model.alpha", ""), Error);

    CHECK(Config::parse("b = 1\na = 2\n").canonical() == Config::parse("a = 2\nb = 1\n").canonical());
    CHECK(Config::parse("a = 2\n").canonical() != Config::parse("a = 3\n").canonical());

    try {
        Config::parse("[a]\nx = 1\nx = 2\n");
        FAIL("duplicate accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::configuration);
        CHECK(e.detail() == 3.0);
    }
    CHECK_THROWS_AS(Config::parse("x = 1.5abc\n"), Error);
    CHECK_THROWS_AS(Config::parse("x = \"open\n"), Error);
    CHECK_THROWS_AS(Config::parse("just text\n"), Error);
    CHECK_THROWS_AS(Config::parse("[sec\n"), Error);
}

TEST_CASE("experiment kinds and builders") {
    for (Kind k : {Kind::symbol, Kind::lp, Kind::pde, Kind::simulate, Kind::verify_apriori, Kind::verify_krylov,
                   Kind::verify_feynman_kac, Kind::verify_zvonkin, Kind::verify_maxprinciple, Kind::verify_coercivity,
                   Kind::verify_commutator, Kind::regime_study})
        CHECK(parse_kind(kind_name(k)) == k);
    CHECK(parse_kind("zvonkin") == Kind::verify_zvonkin);
    CHECK_THROWS_AS(parse_kind("bogus"), Error);

    const auto c = Config::parse("[model]\nalpha = 0.5\ndim = 2\nmeasure = \"isotropic\"\ndirections = 8\n"
                                 "[kernel]\ntype = \"sine\"\nvalue = 2.0\namplitude = 1.0\n"
                                 "[thresholds]\np_value = 0.05\n");
    const auto m = make_model(c);
    CHECK(m.dim() == 2);
    CHECK(m.spherical().atoms().size() == 8);
    const auto k = make_kernel(c);
    CHECK(k.kappa0 == 1.0);
    CHECK(k.kappa1 == 3.0);
    CHECK(Thresholds::from(c).p_value == 0.05);
    CHECK(Thresholds::from(c).sigma_multiple == 3.0);
    CHECK_THROWS_AS(make_kernel(Config::parse("[kernel]\ntype = \"sine\"\nvalue = 1.0\namplitude = 1.0\n")), Error);
    CHECK_THROWS_AS(make_drift(Config::parse("[drift]\ntype = \"wiggly\"\n")), Error);
    CHECK_THROWS_AS(make_model(Config::parse("[model]\ndim = 3\n")), Error);
}

TEST_CASE("report primitives") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(fmt(0.1) == "0.10000000000000001");
    CHECK(fmt(INFINITY) == "inf");
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(255) == "00000000000000ff");

    const auto dir = tmp_dir("report");
    ensure_directory(dir);
    {
        CsvWriter w(dir + "/t.csv", {"x", "note"});
        w.row(std::vector<std::string>{"1", "a,b"});
        CHECK_THROWS_AS(w.row(std::vector<std::string>{"1"}), Error);
    }
    CHECK(slurp(dir + "/t.csv") == "x,note\r\n1,\"a,b\"\r\n");
    write_svg_plot(dir + "/p.svg", {"t", "x", "y", true, true}, {{"s", {1, 10, 100}, {1, 0, 5}}});
    const auto svg = slurp(dir + "/p.svg");
    CHECK(svg.rfind("<svg xmlns=", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("href") == std::string::npos);
}

TEST_CASE("two-sample KS statistic against the brute-force oracle") {
    auto rng = RngStream::derive(3, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(30 + trial), b(45);
        for (auto& v : a) v = std::floor(10.0 * rng.normal()) / 10.0;
        for (auto& v : b) v = std::floor(10.0 * rng.normal() + 3.0) / 10.0;
        double oracle = 0.0;
        std::vector<double> all(a);
        all.insert(all.end(), b.begin(), b.end());
        for (double t : all) {
            double fa = 0, fb = 0;
            for (double v : a) fa += v <= t;
            for (double v : b) fb += v <= t;
            oracle = std::max(oracle, std::abs(fa / a.size() - fb / b.size()));
        }
        CHECK(ks_statistic(a, b) == doctest::Approx(oracle).epsilon(1e-14));
    }
    CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_statistic({0, 1}, {5, 6}) == 1.0);
    CHECK_THROWS_AS(ks_statistic({}, {1.0}), Error);
}

TEST_CASE("hypothesis checks") {
    const auto model = levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1));
    const auto one = hypothesis_check(model, nonlocal::JumpKernel::constant(1.0), nonlocal::DriftField::zero(), 500);
    const auto& b = find_check(one.checks, "Hsigma1: kappa0");
    CHECK(b.status == Status::pass);
    CHECK(b.measured == 1.0);
    CHECK(b.bound == 1.0);
    CHECK(one.all_pass());

    // sigma = 2 + sin x: sampled sup of |sin x - sin y| / |x - y| is below 1.
    const auto sk = nonlocal::JumpKernel::of_x([](std::span<const double> x) { return 2.0 + std::sin(x[0]); }, 1.0, 3.0, 1.0, 1.0);
    const auto rep = hypothesis_check(model, sk, nonlocal::DriftField::zero(), 2000);
    const auto& h = find_check(rep.checks, "Hsigma1: Hoelder");
    CHECK(h.status == Status::pass);
    CHECK(h.measured <= 1.0);
    CHECK(h.measured > 0.9);
    const auto& mod = find_check(rep.checks, "Hsigma2");
    CHECK(mod.status == Status::pass);
    CHECK(mod.measured > 0.0);

    // Drift regularity 0.3 declared as 0.9: the fitted block decay exposes it.
    auto rough = [](double beta_decl) {
        return nonlocal::DriftField::of_x(
            [](std::span<const double> x, std::span<double> out) {
                const double s = std::sin(x[0]);
                out[0] = (s < 0 ? -1.0 : 1.0) * std::pow(std::abs(s), 0.3);
            },
            beta_decl, 1.0);
    };
    const auto bad = hypothesis_check(model, nonlocal::JumpKernel::constant(1.0), rough(0.9), 200);
    const auto& dec = find_check(bad.checks, "Hb: Besov");
    CHECK(dec.status == Status::warn);
    CHECK(dec.measured == doctest::Approx(0.3).epsilon(0.25));
    CHECK(find_check(hypothesis_check(model, nonlocal::JumpKernel::constant(1.0), rough(0.3), 200).checks, "Hb: Besov").status ==
          Status::pass);
    CHECK(find_check(bad.checks, "balance").status == Status::pass);
    const auto low = hypothesis_check(model, nonlocal::JumpKernel::constant(1.0), rough(0.3), 200);
    CHECK(find_check(low.checks, "balance").status == Status::warn);
    CHECK(find_check(low.checks, "Hb3").status == Status::warn);
}

TEST_CASE("zero-source pde run reports the zero solution") {
    const auto dir = tmp_dir("pde_zero");
    const auto res = run_experiment(
        experiment(Kind::pde, "[model]\nalpha = 0.5\n[grid]\nn = 32\n[pde]\nsource = \"zero\"\nT = 0.2\ndt = 0.02\n", dir));
    CHECK(res.exit_code == 0);
    const auto& c = find_check(res.checks, "zero source");
    CHECK(c.status == Status::pass);
    CHECK(c.measured == 0.0);
    for (const char* f : {"summary.csv", "manifest.json", "solution.csv", "diagnostics.csv", "hypotheses.csv"})
        CHECK(std::filesystem::exists(dir + "/" + f));
    const auto manifest = slurp(dir + "/manifest.json");
    CHECK(manifest.find("\"config_hash\": \"fnv1a64:") != std::string::npos);
    CHECK(manifest.find("\"seed\": 1") != std::string::npos);
}

TEST_CASE("repeated run with the same seed is byte-identical") {
    const std::string cfg = "[model]\nalpha = 0.5\n[kernel]\ntype = \"sine\"\nvalue = 1.0\namplitude = 0.5\n"
                            "[sim]\nT = 0.5\ndt = 0.05\neps = 0.05\npaths = 300\nthinning_runs = 200\n";
    const auto a = tmp_dir("det_a"), b = tmp_dir("det_b"), c = tmp_dir("det_c");
    auto ea = experiment(Kind::simulate, cfg, a, 11);
    auto eb = experiment(Kind::simulate, cfg, b, 11);
    eb.threads = 2;
    run_experiment(ea);
    run_experiment(eb);
    run_experiment(experiment(Kind::simulate, cfg, c, 12));
    for (const char* f : {"terminal.csv", "path.csv", "thinning.csv", "summary.csv", "manifest.json"})
        CHECK(slurp(a + "/" + f) == slurp(b + "/" + f));
    CHECK(slurp(a + "/terminal.csv") != slurp(c + "/terminal.csv"));
}

TEST_CASE("module errors surface as exit code 1 with an error record") {
    const auto dir = tmp_dir("err");
    const auto res = run_experiment(experiment(Kind::pde, "[model]\nalpha = 2.5\n", dir));
    CHECK(res.exit_code == 1);
    const auto rec = slurp(dir + "/error.json");
    CHECK(rec.find("\"code\": \"invalid-model\"") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir + "/manifest.json"));

    // Unattainable smallness certificate.
    const auto dz = tmp_dir("err_z");
    const auto rz = run_experiment(experiment(
        Kind::verify_zvonkin,
        "[model]\nalpha = 0.5\n[drift]\ntype = \"sine\"\namplitude = 5.0\n[grid]\nn = 16\n[sim]\nT = 0.2\ndt = 0.02\n"
        "[zvonkin]\nlambdas = [1.0, 2.0]\n",
        dz));
    CHECK(rz.exit_code == 1);
    CHECK(slurp(dz + "/error.json").find("smallness-unattainable") != std::string::npos);
}

TEST_CASE("regime study") {
    RegimeStudyConfig rc{levy::LevyModel::stable_like(0.75, levy::SphericalMeasure::cylindrical(1))};
    rc.beta = 0.5;
    rc.amplitude = 1.0;
    rc.sim.x0 = {0.0};
    rc.sim.T = 1.0;
    rc.sim.dt = 0.02;
    rc.sim.eps = 0.05;
    rc.sim.n_paths = 6000;
    rc.sim.seed = 5;
    const auto rep = regime_study(rc);
    CHECK(rep.regime.balance);
    CHECK_FALSE(rep.descriptive);
    REQUIRE(rep.ks.size() == rc.levels.size() - 1);
    CHECK(rep.decreasing);

    rc.model = levy::LevyModel::stable_like(0.5, levy::SphericalMeasure::cylindrical(1));
    rc.beta = 0.25;
    const auto sup = regime_study(rc);
    CHECK(sup.descriptive);
    CHECK(sup.regime.regime == Regime::supercritical);

    const auto dir = tmp_dir("regime");
    const auto res = run_experiment(experiment(Kind::regime_study,
                                               "[model]\nalpha = 0.5\n[drift]\nbeta = 0.25\namplitude = 1.0\n"
                                               "[sim]\nT = 1.0\ndt = 0.05\npaths = 500\n",
                                               dir));
    CHECK(res.exit_code == 0);
    CHECK(res.checks.front().status == Status::info);
}
