#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "potlatch/harness.hpp"
#include "potlatch/spectral.hpp"
#include "test_util.hpp"

using namespace potlatch;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) return e.what();
    return std::string("wrong code: ") + e.what();
  }
  return "";
}

const char* kBase = R"({"graph": {"kind": "torus", "d": 1, "n": 5}, "horizon": 2.0)";

std::string with(const std::string& extra) { return std::string(kBase) + (extra.empty() ? "" : ", " + extra) + "}"; }

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_experiment_config(with(R"("process": "potlatch", "init": {"kind": "constant", "value": 1}, "replicas": 7, "seed": 99, "checks": ["mass_conservation"], "sample_times": [0, 0.5, 2])"));
  CHECK(cfg.process == ProcessMode::Potlatch);
  CHECK(cfg.replicas == 7);
  CHECK(cfg.seed == 99);
  CHECK(cfg.sample_times == std::vector<double>{0, 0.5, 2});
  CHECK(cfg.init.kind == InitSpec::Kind::Constant);

  const auto geo = parse_experiment_config(with(R"("sample_times": {"geometric": {"start": 0.1, "per_decade": 10}})"));
  CHECK(geo.sample_times.front() == 0.0);
  CHECK(geo.sample_times.back() == 2.0);
  CHECK(geo.sample_times[1] == doctest::Approx(0.1));
  const auto uni = parse_experiment_config(with(R"("sample_times": {"uniform": {"step": 0.5}})"));
  CHECK(uni.sample_times == std::vector<double>{0, 0.5, 1.0, 1.5, 2.0});
  const auto dflt = parse_experiment_config(with(""));
  CHECK(dflt.sample_times.size() > 10);

  const auto round = parse_experiment_config(config_to_json(cfg));
  CHECK(round.sample_times == cfg.sample_times);
  CHECK(round.seed == cfg.seed);
  CHECK(round.checks == cfg.checks);
  CHECK(round.graph.describe() == cfg.graph.describe());

  const auto custom = parse_experiment_config(
      R"({"graph": {"kind": "custom", "n": 2, "P": [[0.9, 0.1], [0.2, 0.8]]}, "horizon": 1, "init": {"kind": "custom", "values": [1, -2]}})");
  CHECK(custom.init.values == std::vector<double>{1, -2});
  CHECK(parse_experiment_config(config_to_json(custom)).graph.describe() == custom.graph.describe());
}

TEST_CASE("config errors name the field") {
  CHECK(config_error("{").find("document") != std::string::npos);
  CHECK(config_error(R"({"horizon": 1})").find("graph") != std::string::npos);
  CHECK(config_error(with(R"("bogus": 1)")).find("bogus") != std::string::npos);
  CHECK(config_error(with(R"("process": "diffusion")")).find("process") != std::string::npos);
  CHECK(config_error(with(R"("replicas": 0)")).find("replicas") != std::string::npos);
  CHECK(config_error(R"({"graph": {"kind": "torus", "d": 1, "n": 5}, "horizon": -1})").find("horizon") != std::string::npos);
  CHECK(config_error(R"({"graph": {"kind": "torus", "d": 1, "n": 4}, "horizon": 1})").find("graph") != std::string::npos);
  CHECK(config_error(with(R"("init": {"kind": "iid", "mean": 2, "second_moment": 3, "distribution": "lognormal"})")).find("second_moment") != std::string::npos);
  CHECK(config_error(with(R"("init": {"kind": "iid", "mean": 1, "second_moment": 3})")).find("second_moment") != std::string::npos);
  CHECK(config_error(with(R"("process": "potlatch", "init": {"kind": "constant", "value": -1})")).find("init.value") != std::string::npos);
  CHECK(config_error(with(R"("init": {"kind": "delta", "site": 5})")).find("init.site") != std::string::npos);
  CHECK(config_error(with(R"("init": {"kind": "custom", "values": [1, 2]})")).find("init.values") != std::string::npos);
  CHECK(config_error(with(R"("sample_times": [0, 3])")).find("sample_times") != std::string::npos);
  CHECK(config_error(with(R"("sample_times": [1, 0.5])")).find("sample_times") != std::string::npos);
  CHECK(config_error(with(R"("checks": ["nonsense"])")).find("nonsense") != std::string::npos);
  CHECK(config_error(with(R"("checks": ["mass_conservation"])")).find("checks") != std::string::npos);
  CHECK(config_error(with(R"("checks": ["duality"])")).find("checks") != std::string::npos);
  CHECK(config_error(with(R"("replicas": "many")")).find("document") != std::string::npos);
  for (auto name : known_checks()) CHECK_FALSE(name.empty());
}

TEST_CASE("schedules") {
  const auto g = geometric_schedule(0.1, 10.0, 20);
  CHECK(g.size() == 1 + 40 + 1);
  CHECK(g.back() == 10.0);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(geometric_schedule(0.1, 0.0) == std::vector<double>{0.0});
  CHECK(uniform_schedule(0.3, 1.0) == std::vector<double>{0.0, 0.3, 0.6, 0.8999999999999999, 1.0});
}

TEST_CASE("initial samplers") {
  std::mt19937_64 rng(3);
  InitSpec spec;
  spec.kind = InitSpec::Kind::Iid;
  spec.mean = 2.0;
  for (auto [dist, zeta] : {std::pair{IidDistribution::Exponential, 8.0}, {IidDistribution::BernoulliScaled, 10.0},
                            {IidDistribution::Lognormal, 5.0}}) {
    spec.distribution = dist;
    spec.second_moment = zeta;
    double s1 = 0.0;
    double s2 = 0.0;
    double s4 = 0.0;
    std::size_t count = 0;
    for (int r = 0; r < 200; ++r) {
      const auto y = sample_initial(spec, 1000, rng);
      for (double v : y) {
        CHECK(v >= 0.0);
        s1 += v;
        s2 += v * v;
        s4 += v * v * v * v;
        ++count;
      }
    }
    const double m1 = s1 / count;
    const double m2 = s2 / count;
    const double sd2 = std::sqrt((s4 / count - m2 * m2) / count);
    CHECK(std::abs(m1 - 2.0) <= 5.0 * std::sqrt((m2 - m1 * m1) / count));
    CHECK(std::abs(m2 - zeta) <= 5.0 * sd2);
  }
  InitSpec delta;
  delta.site = 2;
  CHECK(sample_initial(delta, 4, rng) == MassProfile{0, 0, 1, 0});
}

TEST_CASE("run_experiment: zero horizon reproduces the initial functionals") {
  auto cfg = parse_experiment_config(R"({"graph": {"kind": "torus", "d": 2, "n": 3}, "horizon": 0, "replicas": 1,
      "init": {"kind": "custom", "values": [1, 0, 2, 0, 0, 3, 0, 0, 1]}})");
  const auto res = run_experiment(cfg);
  const Kernel k = build_kernel(cfg.graph);
  const auto rec = eval_functionals(cfg.init.values, k);
  REQUIRE(res.functionals.size() == kFunctionalCount);
  for (std::size_t f = 0; f < kFunctionalCount; ++f) {
    CHECK(res.functionals[f].mean.size() == 1);
    CHECK(res.functionals[f].mean[0] == functional_value(rec, f));
  }
}

TEST_CASE("run_experiment: determinism across runs and worker counts") {
  auto cfg = parse_experiment_config(with(R"("init": {"kind": "iid", "mean": 1, "second_moment": 2}, "replicas": 600, "seed": 5)"));
  auto csv = [](const ExperimentConfig& c) {
    const auto res = run_experiment(c, true);
    std::ostringstream os;
    write_trajectory_csv(os, res.trajectories);
    for (const auto& e : res.functionals) write_estimate_csv(os, e);
    return os.str();
  };
  cfg.workers = 1;
  const auto a = csv(cfg);
  const auto b = csv(cfg);
  cfg.workers = 5;
  const auto c = csv(cfg);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a.rfind("replica_id,t,V,E,E2,Estar,sum_delta_sq,Ybar,min_mass,max_mass\n", 0) == 0);
}

TEST_CASE("run_experiment: basic checks pass") {
  const auto pot = run_experiment(parse_experiment_config(
      with(R"("process": "potlatch", "init": {"kind": "iid", "mean": 1, "second_moment": 2}, "replicas": 50, "checks": ["mass_conservation"])")));
  REQUIRE(pot.report.verdicts.size() == 1);
  CHECK(pot.report.verdicts[0].check == "mass_conservation");
  CHECK(pot.report.all_pass());

  const auto sm = run_experiment(parse_experiment_config(with(
      R"("init": {"kind": "iid", "mean": 1, "second_moment": 2}, "replicas": 100, "checks": ["energy_monotone", "max_min_monotone", "spectral_identities", "gap_formulas", "G_integral"])")));
  CHECK(sm.report.verdicts.size() == 5);
  for (const auto& v : sm.report.verdicts) {
    CAPTURE(v.check);
    CAPTURE(v.detail);
    CHECK(v.pass);
  }
}

TEST_CASE("verdict report JSON round trip") {
  VerdictReport r;
  r.verdicts.push_back({"a", true, 0.125, 1.0, 1e-12, 0.5, "detail"});
  r.verdicts.push_back({"b", false, std::nan(""), -2.0, 3.0, 0.0, ""});
  const auto back = VerdictReport::from_json(r.to_json());
  REQUIRE(back.verdicts.size() == 2);
  CHECK(back.verdicts[0].check == "a");
  CHECK(back.verdicts[0].pass);
  CHECK(back.verdicts[0].observed == 0.125);
  CHECK(back.verdicts[0].tolerance == 1e-12);
  CHECK(back.verdicts[0].detail == "detail");
  CHECK_FALSE(back.verdicts[1].pass);
  CHECK(std::isnan(back.verdicts[1].observed));
  CHECK(back.verdicts[1].bound == -2.0);
  CHECK_FALSE(back.all_pass());
  CHECK(back.to_json() == r.to_json());
  CHECK_ERROR_CODE(VerdictReport::from_json("[]"), ErrorCode::ConfigInvalid);
}

TEST_CASE("avg_mass_experiment") {
  SUBCASE("constant init gives zero") {
    auto cfg = parse_experiment_config(with(R"("init": {"kind": "constant", "value": 3}, "replicas": 20, "t_inf": 30)"));
    const auto res = avg_mass_experiment(cfg);
    for (double m : res.statistic.mean) CHECK(m == 0.0);
  }
  SUBCASE("shift invariance") {
    auto a = parse_experiment_config(with(R"("init": {"kind": "custom", "values": [1, 0, 2, 0, 0]}, "replicas": 50, "t_inf": 40)"));
    auto b = parse_experiment_config(with(R"("init": {"kind": "custom", "values": [6, 5, 7, 5, 5]}, "replicas": 50, "t_inf": 40)"));
    const auto ra = avg_mass_experiment(a);
    const auto rb = avg_mass_experiment(b);
    REQUIRE(ra.statistic.mean.size() == rb.statistic.mean.size());
    for (std::size_t i = 0; i < ra.statistic.mean.size(); ++i)
      CHECK(rb.statistic.mean[i] == doctest::Approx(ra.statistic.mean[i]).epsilon(1e-9).scale(1e-14));
  }
  SUBCASE("requires smoothing on a torus") {
    auto cfg = parse_experiment_config(with(R"("process": "potlatch")"));
    CHECK_ERROR_CODE(avg_mass_experiment(cfg), ErrorCode::ConfigInvalid);
  }
}

TEST_CASE("duality at t = 0 and on complete(2)") {
  auto cfg = parse_experiment_config(R"({"graph": {"kind": "complete", "n": 2}, "process": "dual", "horizon": 1,
      "sample_times": [0, 0.5, 1], "init": {"kind": "custom", "values": [1, 0]}, "replicas": 4000})");
  const auto v = duality_experiment(cfg);
  CHECK(v.check == "duality");
  CHECK(v.pass);
  auto zero = cfg;
  zero.sample_times = {0.0};
  CHECK(duality_experiment(zero).observed == 0.0);
}

TEST_CASE("run_replicas merges in block order and propagates failures") {
  struct Acc {
    std::vector<std::size_t> ids;
    void merge(const Acc& o) { ids.insert(ids.end(), o.ids.begin(), o.ids.end()); }
  };
  const auto out = run_replicas(1000, 8, Acc{}, [](std::size_t r, Acc& a) { a.ids.push_back(r); }, 64);
  REQUIRE(out.ids.size() == 1000);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(out.ids[i] == i);
  CHECK_THROWS_AS(run_replicas(1000, 4, Acc{},
                               [](std::size_t r, Acc&) {
                                 if (r == 517) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("suites") {
  CHECK(known_suites().size() == 7);
  CHECK_ERROR_CODE(run_suite("nope", std::nullopt, 1, 0), ErrorCode::ConfigInvalid);
  const auto report = run_suite("conservation", 30, 1, 0);
  CHECK(report.verdicts.size() == 3);
  CHECK(report.all_pass());
}
