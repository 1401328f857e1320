#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <sstream>

#include "gwsteer/config.hpp"
#include "gwsteer/errors.hpp"
#include "gwsteer/harness.hpp"
#include "gwsteer/report_io.hpp"

using namespace gwsteer;

namespace {

struct Overrides {
  long long seed = -1;
  double tol = 0.0;
  int max_iters = 0;
};

ScenarioConfig load_with(const std::string& path, const Overrides& ov) {
  ScenarioConfig cfg = load_config(path);
  if (ov.seed >= 0) cfg.seed = static_cast<std::uint64_t>(ov.seed);
  if (ov.tol > 0) cfg.outer.sdp_tol = ov.tol;
  if (ov.max_iters > 0) cfg.outer.max_outer_iters = ov.max_iters;
  return cfg;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void stamp(ExperimentReport& rep, double total) {
  nlohmann::json wall = nlohmann::json::array();
  for (const RunRecord& r : rep.runs) wall.push_back(r.wall_time);
  rep.metadata = {{"timestamp", timestamp()}, {"wall_times", wall}, {"total_wall_time", total}};
}

void emit(ExperimentReport& rep, const std::string& out, double total) {
  stamp(rep, total);
  export_json(rep, out);
  export_csv(rep, out);
}

void summarize(const ExperimentReport& rep) {
  for (const std::string& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const RunRecord& r : rep.runs)
    std::printf("run %d eps %.6g: J %.10g rho %.10g gw %.10g ratio %.8f rank_gap %.3e status %s\n", r.run_id, r.eps,
                r.J, r.rho, r.gw, r.certificate.ratio, r.certificate.rank_gap, r.status.c_str());
  for (const SweepRow& s : rep.sweep) {
    if (s.ok) std::printf("sweep eps %.6g: control %.10g gw %.10g\n", s.eps, s.control_cost, s.gw_distance);
    else std::printf("sweep eps %.6g: failed (%s)\n", s.eps, s.error.c_str());
  }
  if (!rep.sweep.empty())
    std::printf("control non-increasing: %s, gw non-decreasing: %s\n", rep.control_nonincreasing ? "yes" : "no",
                rep.gw_nondecreasing ? "yes" : "no");
  for (const RunRecord& r : rep.runs)
    if (r.has_cluster)
      std::printf("run %d clusters:%s intra %.6g inter %.6g ratio %.6g (configured %.6g)\n", r.run_id,
                  [&] {
                    std::ostringstream os;
                    for (int s : r.cluster.cluster_sizes) os << ' ' << s;
                    return os.str();
                  }().c_str(),
                  r.cluster.intra_mean, r.cluster.inter_mean, r.cluster.ratio, r.cluster.configured_ratio);
}

std::vector<double> parse_eps(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InputError("--eps: cannot parse '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gromov-Wasserstein multi-agent steering"};
  app.require_subcommand(1);
  Overrides ov;
  std::string config, report, out = "out", eps_text, format = "csv";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "scenario config (JSON)")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", ov.seed, "override the config seed");
    sub->add_option("--tol", ov.tol, "override the SDP tolerance");
    sub->add_option("--max-iters", ov.max_iters, "override the outer iteration cap");
  };
  CLI::App* run = app.add_subcommand("run", "run the seeded experiment");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "sweep the control-cost weight");
  add_common(sweep);
  sweep->add_option("--eps", eps_text, "comma-separated eps values (default: config eps_list)");
  CLI::App* group = app.add_subcommand("group", "graph-metric grouping experiment");
  add_common(group);
  CLI::App* cert = app.add_subcommand("certify", "recompute certificates from a stored report");
  cert->add_option("report", report, "report.json")->required();
  CLI::App* exp = app.add_subcommand("export", "export a stored report");
  exp->add_option("report", report, "report.json")->required();
  exp->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  exp->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    if (*run || *group) {
      const ScenarioConfig cfg = load_with(config, ov);
      ExperimentReport rep = *run ? run_experiment(cfg) : grouping_experiment(cfg);
      emit(rep, out, elapsed());
      summarize(rep);
      return 0;
    }
    if (*sweep) {
      const ScenarioConfig cfg = load_with(config, ov);
      const std::vector<double> eps = eps_text.empty() ? cfg.eps_list : parse_eps(eps_text);
      ExperimentReport rep = sweep_epsilon(cfg, eps);
      emit(rep, out, elapsed());
      summarize(rep);
      for (const SweepRow& s : rep.sweep)
        if (!s.ok) return s.error_class;
      return 0;
    }
    if (*cert) {
      const ExperimentReport rep = read_report(report);
      bool all = true;
      for (const RecomputedRun& r : certify_report(rep)) {
        std::printf("run %d: ratio %.17g (stored %.17g) rank_gap %.17g (stored %.17g) gw %.17g (stored %.17g) %s\n",
                    r.run_id, r.recomputed.ratio, r.stored.ratio, r.recomputed.rank_gap, r.stored.rank_gap,
                    r.gw_recomputed, r.gw_stored, r.match ? "match" : "MISMATCH");
        all = all && r.match;
      }
      return all ? 0 : 3;
    }
    if (*exp) {
      const ExperimentReport rep = read_report(report);
      if (format == "csv") export_csv(rep, out);
      else export_json(rep, out);
      return 0;
    }
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const CertificateError& e) {
    std::fprintf(stderr, "certificate failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
