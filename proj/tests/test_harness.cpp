#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gwsteer/config.hpp"
#include "gwsteer/errors.hpp"
#include "gwsteer/harness.hpp"
#include "gwsteer/report_io.hpp"

using namespace gwsteer;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

json small_config() {
  return json::parse(R"({
    "system": {"A": [[0.5, 0.2], [0.1, 0.4]], "B": [[1, 0], [0, 1]]},
    "horizon": 10,
    "agents": 3,
    "eps": 0.5,
    "boxes": {"state": 20, "control": 20, "terminal": 20},
    "initial_cloud": {"sampler": {"lower": [-15, -2], "upper": [-12, 2]}},
    "target": {"shape": "points", "points": [[3, 0], [-1, 2], [0, -2]]},
    "seed": 4
  })");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gwsteer_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GWSTEER_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(1);
}

std::string parse_error(const json& j) {
  try {
    parse_config(j);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("counter generator matches an independent splitmix64") {
    for (std::uint64_t s : {0ULL, 1ULL, 12345ULL})
      for (std::uint64_t c = 0; c < 50; ++c) {
        CHECK(counter_hash(s, c) == splitmix(s, c));
        const double u = counter_uniform(s, c);
        CHECK(u == static_cast<double>(splitmix(s, c) >> 11) * 0x1.0p-53);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
      }
  }

  TEST_CASE("property: sampled clouds are reproducible and inside the sampler box") {
    SamplerSpec spec{Eigen::Vector2d(-15, -2), Eigen::Vector2d(-12, 2)};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const PointCloud a = sample_cloud(spec, 7, seed), b = sample_cloud(spec, 7, seed);
      CHECK((a.points - b.points).norm() == 0.0);
      CHECK(a.points.row(0).minCoeff() >= -15);
      CHECK(a.points.row(0).maxCoeff() <= -12);
      CHECK(a.points.row(1).cwiseAbs().maxCoeff() <= 2);
      CHECK(a.points(1, 3) == doctest::Approx(-2 + 4 * counter_uniform(seed, 3 * 2 + 1)));
    }
    CHECK((sample_cloud(spec, 7, 1).points - sample_cloud(spec, 7, 2).points).norm() > 0.0);
  }

  TEST_CASE("circle and line targets") {
    TargetSpec t;
    t.shape = "circle";
    t.radius = 3;
    t.center = Eigen::Vector2d(1, -1);
    const PointCloud c = target_cloud(t, 8, 2);
    for (int i = 0; i < 8; ++i) CHECK((c.point(i) - t.center).norm() == doctest::Approx(3.0));
    CHECK(c.points(0, 2) == doctest::Approx(1.0).epsilon(1e-12));  // angle pi/2
    CHECK(c.points(1, 2) == doctest::Approx(2.0));
    t.jitter = 0.3;
    t.seed = 11;
    const PointCloud j = target_cloud(t, 8, 2);
    const double ang = 2 * M_PI * (1 + 0.3 * (counter_uniform(11, 1) - 0.5)) / 8;
    CHECK(j.points(0, 1) == doctest::Approx(1 + 3 * std::cos(ang)));
    TargetSpec l;
    l.shape = "line";
    l.start = Eigen::Vector2d(0, 0);
    l.end = Eigen::Vector2d(4, 0);
    const PointCloud ln = target_cloud(l, 5, 2);
    CHECK(ln.points(0, 4) == doctest::Approx(4.0));
    CHECK(ln.points(0, 1) == doctest::Approx(1.0));
    l.shape = "spiral";
    CHECK_THROWS_AS(target_cloud(l, 5, 2), InputError);
  }

  TEST_CASE("config parsing names the offending field") {
    CHECK_NOTHROW(parse_config(small_config()));
    json j = small_config();
    j["horizn"] = 3;
    CHECK(parse_error(j).find("config.horizn: unknown key") != std::string::npos);
    j = small_config();
    j.erase("horizon");
    CHECK(parse_error(j).find("config.horizon") != std::string::npos);
    j = small_config();
    j["boxes"]["control"] = -1;
    CHECK(parse_error(j).find("config.boxes.control") != std::string::npos);
    j = small_config();
    j["eps_list"] = {1.0, 0.5};
    j.erase("eps");
    CHECK(parse_error(j).find("config.eps_list") != std::string::npos);
    j = small_config();
    j["initial_cloud"]["sampler"]["upper"] = {25, 2};
    CHECK(parse_error(j).find("sampler box") != std::string::npos);
    j = small_config();
    j["R"] = {{1, 0}, {0, -1}};
    CHECK(parse_error(j).find("config.R") != std::string::npos);
    j = small_config();
    j.erase("target");
    CHECK(parse_error(j).find("config.target") != std::string::npos);
    j = small_config();
    j["solver"] = {{"sdp_method", "magic"}};
    CHECK(parse_error(j).find("config.solver.sdp_method") != std::string::npos);
    j = small_config();
    j["target"]["points"] = {{3, 0}, {-1, 2}};
    CHECK(parse_error(j).find("config.target.points") != std::string::npos);
  }

  TEST_CASE("config echo parses back to the same settings") {
    const ScenarioConfig a = parse_config(small_config());
    const json e = a.echo();
    const ScenarioConfig b = parse_config(e);
    CHECK(b.echo() == e);
    CHECK(b.N == 3);
    CHECK(b.seed == 4);
    CHECK((b.initial_cloud(0).points - a.initial_cloud(0).points).norm() == 0.0);
    CHECK((a.initial_cloud(1).points - a.initial_cloud(0).points).norm() > 0.0);
  }

  TEST_CASE("17-digit JSON output") {
    const json j = {{"b", 0.1}, {"a", 2.0}, {"c", {1, 2}}};
    const std::string s = dump_json17(j, -1);
    CHECK(s.find("0.10000000000000001") != std::string::npos);
    CHECK(s.find("2.0") != std::string::npos);
    CHECK(s.find("\"a\"") < s.find("\"b\""));
    CHECK(json::parse(s)["b"].get<double>() == 0.1);
  }

  TEST_CASE("cluster diagnostics on two well separated triangles") {
    Eigen::MatrixXd X(2, 6);
    X << 0, 1, 0.5, 10, 11, 10.5, 0, 0, 0.8, 0, 0, 0.8;
    GroupSpec g{{0, 0, 0, 1, 1, 1}, 2.0, 4.0};
    const ClusterDiagnostics d =
        cluster_diagnostics(PointCloud(X), Coupling::scaled_permutation({0, 1, 2, 3, 4, 5}), g, CostKind::euclidean);
    CHECK(d.label == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(d.configured_ratio == doctest::Approx(0.5));
    CHECK(d.ratio < 0.2);
    CHECK(d.cluster_sizes == std::vector<int>{3, 3});
    CHECK(d.clusters_match_groups);
  }

  TEST_CASE("run report survives a JSON round trip and certifies") {
    const ScenarioConfig cfg = parse_config(small_config());
    const ExperimentReport rep = run_experiment(cfg);
    REQUIRE(rep.runs.size() == 1);
    const RunRecord& r = rep.runs[0];
    CHECK(r.J == doctest::Approx(0.5 * r.rho + r.gw));
    CHECK(r.certificate.ratio == doctest::Approx(1.0).epsilon(1e-3));

    const fs::path dir = scratch_dir("roundtrip");
    write_report(rep, (dir / "a.json").string());
    const ExperimentReport back = read_report((dir / "a.json").string());
    write_report(back, (dir / "b.json").string());
    CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
    for (const RecomputedRun& c : certify_report(back)) CHECK(c.match);

    export_csv(back, dir.string());
    const std::string traj = read_file(dir / "trajectories.csv");
    CHECK(traj.rfind("run_id,agent,t,x0,x1,u0,u1\n", 0) == 0);
    CHECK(std::count(traj.begin(), traj.end(), '\n') == 1 + 3 * 11);
    CHECK(read_file(dir / "certificates.csv").rfind("run_id,ratio,rank_gap\n", 0) == 0);
    CHECK(read_file(dir / "sweep.csv").rfind("eps,control_cost,gw_distance\n", 0) == 0);
  }

  TEST_CASE("sweep flags and per-row failures") {
    const ScenarioConfig cfg = parse_config(small_config());
    const ExperimentReport rep = sweep_epsilon(cfg, {0.2, 2.0});
    REQUIRE(rep.sweep.size() == 2);
    CHECK(rep.sweep[0].ok);
    CHECK(rep.sweep[0].control_cost >= rep.sweep[1].control_cost);
    CHECK(rep.sweep[0].gw_distance <= rep.sweep[1].gw_distance);
    CHECK(rep.control_nonincreasing);
    CHECK(rep.gw_nondecreasing);
    CHECK_THROWS_AS(sweep_epsilon(cfg, {1.0, 0.5}), InputError);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes and outputs") {
    const fs::path dir = scratch_dir("cli");
    write_json(dir / "small.json", small_config());
    CHECK(run_cli("run " + (dir / "small.json").string() + " --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "report.json"));
    CHECK(fs::exists(dir / "out" / "trajectories.csv"));
    CHECK(run_cli("certify " + (dir / "out" / "report.json").string()) == 0);
    CHECK(run_cli("export " + (dir / "out" / "report.json").string() + " --format csv --out " +
                  (dir / "exp").string()) == 0);
    CHECK(read_file(dir / "exp" / "trajectories.csv") == read_file(dir / "out" / "trajectories.csv"));

    // a tampered report no longer certifies
    json rep = json::parse(read_file(dir / "out" / "report.json"));
    rep["runs"][0]["gw_value"] = rep["runs"][0]["gw_value"].get<double>() + 1.0;
    write_json(dir / "tampered.json", rep);
    CHECK(run_cli("certify " + (dir / "tampered.json").string()) == 3);

    CHECK(run_cli("run " + (dir / "missing.json").string()) == 1);
    json bad = small_config();
    bad["agents"] = 1;
    write_json(dir / "bad.json", bad);
    CHECK(run_cli("run " + (dir / "bad.json").string() + " --out " + (dir / "o2").string()) == 1);

    // expanding dynamics with a tight control box: the initial cloud cannot be steered into range
    json inf = small_config();
    inf["system"]["A"] = {{2, 0}, {0, 2}};
    inf["horizon"] = 3;
    inf["boxes"] = {{"state", 200}, {"control", 1}, {"terminal", 20}};
    inf["initial_cloud"] = {{"points", {{15, 0}, {15.5, 0}, {16, 0}}}};
    write_json(dir / "inf.json", inf);
    CHECK(run_cli("run " + (dir / "inf.json").string() + " --out " + (dir / "o3").string()) == 2);

    CHECK(run_cli("") != 0);
    CHECK(run_cli("export " + (dir / "out" / "report.json").string() + " --format xml") != 0);
  }
}
