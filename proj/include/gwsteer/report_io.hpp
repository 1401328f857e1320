#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "gwsteer/harness.hpp"

namespace gwsteer {

// JSON text with every floating value written with 17 significant digits; object keys sorted.
std::string dump_json17(const nlohmann::json& j, int indent = 1);

nlohmann::json report_to_json(const ExperimentReport& rep);
ExperimentReport report_from_json(const nlohmann::json& j);

void write_report(const ExperimentReport& rep, const std::string& path);
ExperimentReport read_report(const std::string& path);

// trajectories.csv, sweep.csv, certificates.csv inside dir (created if missing).
void export_csv(const ExperimentReport& rep, const std::string& dir);
// report.json inside dir.
void export_json(const ExperimentReport& rep, const std::string& dir);

struct RecomputedRun {
  int run_id = 0;
  Certificate stored, recomputed;
  double gw_stored = 0.0, gw_recomputed = 0.0;
  double rho_stored = 0.0, rho_recomputed = 0.0;
  bool match = false;  // certificate, gw within 1e-9 and rho within 1e-6 (relative to max(1,|.|))
};

// Rebuilds G from the stored x_d and reference, re-evaluates GW(P) and the certificate from the
// stored solver moment matrix, and re-solves the steering problems for rho.
std::vector<RecomputedRun> certify_report(const ExperimentReport& rep);

}  // namespace gwsteer
