#include "gwsteer/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gwsteer/errors.hpp"

namespace gwsteer {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

void dump_rec(const json& j, std::ostringstream& os, int indent, int depth) {
  const std::string pad = indent > 0 ? "\n" + std::string(indent * (depth + 1), ' ') : "";
  const std::string close = indent > 0 ? "\n" + std::string(indent * depth, ' ') : "";
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        os << pad << json(it.key()).dump() << (indent > 0 ? ": " : ":");
        dump_rec(it.value(), os, indent, depth + 1);
      }
      os << close << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // numeric arrays stay on one line
      bool flat = true;
      for (const json& e : j)
        if (e.is_structured()) flat = false;
      os << '[';
      bool first = true;
      for (const json& e : j) {
        if (!first) os << (flat && indent > 0 ? ", " : ",");
        first = false;
        if (!flat) os << pad;
        dump_rec(e, os, indent, depth + 1);
      }
      if (!flat) os << close;
      os << ']';
      return;
    }
    case json::value_t::number_float:
      os << fmt17(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

json mat_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

// points as a list of coordinate rows
json cloud_json(const Eigen::MatrixXd& pts) { return mat_json(pts.transpose()); }

double as_num(const json& v) {
  if (v.is_null()) return std::nan("");
  if (!v.is_number()) throw InputError("report: expected a number");
  return v.get<double>();
}

Eigen::MatrixXd json_mat(const json& v) {
  if (!v.is_array()) throw InputError("report: expected a matrix");
  if (v.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd M(v.size(), v[0].size());
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != v[0].size()) throw InputError("report: ragged matrix");
    for (std::size_t c = 0; c < v[r].size(); ++c) M(r, c) = as_num(v[r][c]);
  }
  return M;
}

Eigen::MatrixXd json_cloud(const json& v) { return json_mat(v).transpose(); }

json cert_json(const Certificate& c) {
  return {{"ratio", c.ratio}, {"rank_gap", c.rank_gap}, {"is_global", c.is_global}, {"is_rank_one", c.is_rank_one}};
}

Certificate json_cert(const json& j) {
  Certificate c;
  c.ratio = as_num(j.at("ratio"));
  c.rank_gap = as_num(j.at("rank_gap"));
  c.is_global = j.at("is_global").get<bool>();
  c.is_rank_one = j.at("is_rank_one").get<bool>();
  return c;
}

json run_json(const RunRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["seed"] = r.seed;
  j["eps"] = r.eps;
  j["status"] = r.status;
  j["initial_projected"] = r.initial_projected;
  j["x0"] = cloud_json(r.x0.points);
  j["xd"] = cloud_json(r.xd.points);
  j["target"] = r.target.size() ? cloud_json(r.target) : json(nullptr);
  j["reference"] = {{"kind", to_string(r.reference.kind)}, {"entries", mat_json(r.reference.entries)}};
  j["rho"] = r.rho;
  j["gw_value"] = r.gw;
  j["J"] = r.J;
  j["certificate"] = cert_json(r.certificate);
  j["coupling"] = mat_json(r.P.entries);
  j["relaxation"] = {{"coupling", mat_json(r.relaxed.P.entries)}, {"qhat", mat_json(r.relaxed.Qhat)}};
  j["sdp_method"] = r.sdp_method;
  j["polished"] = r.polished;
  json hist = json::array();
  for (const HistoryEntry& h : r.history)
    hist.push_back({{"J", h.J}, {"rho", h.rho}, {"gw", h.gw}, {"ratio", h.ratio}, {"rank_gap", h.rank_gap}});
  j["history"] = hist;
  json states = json::array(), controls = json::array();
  for (const Eigen::MatrixXd& s : r.trajectory.states) states.push_back(cloud_json(s));
  for (const Eigen::MatrixXd& u : r.trajectory.controls) controls.push_back(cloud_json(u));
  j["trajectory"] = {{"states", states},
                     {"controls", controls},
                     {"agent_costs", r.trajectory.agent_costs},
                     {"box_active", r.trajectory.box_active},
                     {"control_cost", r.trajectory.control_cost},
                     {"weighted_cost", r.trajectory.weighted_cost}};
  if (r.has_cluster) {
    const ClusterDiagnostics& c = r.cluster;
    j["cluster"] = {{"assignment", c.assignment},   {"label", c.label},
                    {"intra_mean", c.intra_mean},   {"inter_mean", c.inter_mean},
                    {"ratio", c.ratio},             {"configured_ratio", c.configured_ratio},
                    {"threshold", c.threshold},     {"cluster_of", c.cluster_of},
                    {"cluster_sizes", c.cluster_sizes}, {"clusters_match_groups", c.clusters_match_groups},
                    {"cost", c.cost}};
  } else {
    j["cluster"] = nullptr;
  }
  return j;
}

RunRecord json_run(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.eps = as_num(j.at("eps"));
  r.status = j.at("status").get<std::string>();
  r.initial_projected = j.at("initial_projected").get<bool>();
  r.x0 = PointCloud(json_cloud(j.at("x0")));
  r.xd = PointCloud(json_cloud(j.at("xd")));
  if (!j.at("target").is_null()) r.target = json_cloud(j.at("target"));
  r.reference.kind = cost_kind_from_string(j.at("reference").at("kind").get<std::string>());
  r.reference.entries = json_mat(j.at("reference").at("entries"));
  r.rho = as_num(j.at("rho"));
  r.gw = as_num(j.at("gw_value"));
  r.J = as_num(j.at("J"));
  r.certificate = json_cert(j.at("certificate"));
  r.P = Coupling(json_mat(j.at("coupling")));
  r.relaxed.P = Coupling(json_mat(j.at("relaxation").at("coupling")));
  r.relaxed.Qhat = json_mat(j.at("relaxation").at("qhat"));
  r.sdp_method = j.at("sdp_method").get<std::string>();
  r.polished = j.at("polished").get<bool>();
  for (const json& h : j.at("history"))
    r.history.push_back({as_num(h.at("J")), as_num(h.at("rho")), as_num(h.at("gw")), as_num(h.at("ratio")),
                         as_num(h.at("rank_gap"))});
  const json& t = j.at("trajectory");
  for (const json& s : t.at("states")) r.trajectory.states.push_back(json_cloud(s));
  for (const json& u : t.at("controls")) r.trajectory.controls.push_back(json_cloud(u));
  for (const json& c : t.at("agent_costs")) r.trajectory.agent_costs.push_back(as_num(c));
  r.trajectory.box_active = t.at("box_active").get<std::vector<bool>>();
  r.trajectory.control_cost = as_num(t.at("control_cost"));
  r.trajectory.weighted_cost = as_num(t.at("weighted_cost"));
  if (!j.at("cluster").is_null()) {
    const json& c = j.at("cluster");
    r.has_cluster = true;
    r.cluster.assignment = c.at("assignment").get<std::vector<int>>();
    r.cluster.label = c.at("label").get<std::vector<int>>();
    r.cluster.intra_mean = as_num(c.at("intra_mean"));
    r.cluster.inter_mean = as_num(c.at("inter_mean"));
    r.cluster.ratio = as_num(c.at("ratio"));
    r.cluster.configured_ratio = as_num(c.at("configured_ratio"));
    r.cluster.threshold = as_num(c.at("threshold"));
    r.cluster.cluster_of = c.at("cluster_of").get<std::vector<int>>();
    r.cluster.cluster_sizes = c.at("cluster_sizes").get<std::vector<int>>();
    r.cluster.clusters_match_groups = c.at("clusters_match_groups").get<bool>();
    r.cluster.cost = c.at("cost").get<std::string>();
  }
  return r;
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
  return std::filesystem::path(dir);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string csv17(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string dump_json17(const json& j, int indent) {
  std::ostringstream os;
  dump_rec(j, os, indent, 0);
  os << '\n';
  return os.str();
}

json report_to_json(const ExperimentReport& rep) {
  json j;
  j["kind"] = rep.kind;
  j["config"] = rep.config;
  json runs = json::array();
  for (const RunRecord& r : rep.runs) runs.push_back(run_json(r));
  j["runs"] = runs;
  json rows = json::array();
  for (const SweepRow& s : rep.sweep)
    rows.push_back({{"eps", s.eps},
                    {"ok", s.ok},
                    {"control_cost", s.ok ? json(s.control_cost) : json(nullptr)},
                    {"gw_distance", s.ok ? json(s.gw_distance) : json(nullptr)},
                    {"J", s.ok ? json(s.J) : json(nullptr)},
                    {"error", s.error},
                    {"error_class", s.error_class}});
  j["sweep"] = rows;
  j["sweep_flags"] = {{"control_nonincreasing", rep.control_nonincreasing},
                      {"gw_nondecreasing", rep.gw_nondecreasing},
                      {"extremes_strict", rep.extremes_strict}};
  j["warnings"] = rep.warnings;
  j["metadata"] = rep.metadata;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport rep;
  try {
    rep.kind = j.at("kind").get<std::string>();
    rep.config = j.at("config");
    for (const json& r : j.at("runs")) rep.runs.push_back(json_run(r));
    for (const json& s : j.at("sweep")) {
      SweepRow row;
      row.eps = as_num(s.at("eps"));
      row.ok = s.at("ok").get<bool>();
      if (row.ok) {
        row.control_cost = as_num(s.at("control_cost"));
        row.gw_distance = as_num(s.at("gw_distance"));
        row.J = as_num(s.at("J"));
      }
      row.error = s.at("error").get<std::string>();
      row.error_class = s.at("error_class").get<int>();
      rep.sweep.push_back(row);
    }
    const json& f = j.at("sweep_flags");
    rep.control_nonincreasing = f.at("control_nonincreasing").get<bool>();
    rep.gw_nondecreasing = f.at("gw_nondecreasing").get<bool>();
    rep.extremes_strict = f.at("extremes_strict").get<bool>();
    rep.warnings = j.at("warnings").get<std::vector<std::string>>();
    rep.metadata = j.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw InputError(std::string("report: malformed document: ") + e.what());
  }
  return rep;
}

void write_report(const ExperimentReport& rep, const std::string& path) {
  write_text(path, dump_json17(report_to_json(rep)));
}

ExperimentReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("report: invalid JSON in '" + path + "': " + e.what());
  }
  return report_from_json(j);
}

void export_json(const ExperimentReport& rep, const std::string& dir) {
  write_report(rep, (ensure_dir(dir) / "report.json").string());
}

void export_csv(const ExperimentReport& rep, const std::string& dir) {
  const std::filesystem::path base = ensure_dir(dir);

  int d = 0, m = 0;
  for (const RunRecord& r : rep.runs)
    if (!r.trajectory.states.empty()) {
      d = static_cast<int>(r.trajectory.states[0].rows());
      if (!r.trajectory.controls.empty()) m = static_cast<int>(r.trajectory.controls[0].rows());
      break;
    }
  if (d == 0 && rep.config.contains("dimension")) d = rep.config["dimension"].get<int>();
  if (m == 0 && rep.config.contains("system")) m = static_cast<int>(rep.config["system"]["B"][0].size());

  std::ostringstream tr;
  tr << "run_id,agent,t";
  for (int a = 0; a < d; ++a) tr << ",x" << a;
  for (int a = 0; a < m; ++a) tr << ",u" << a;
  tr << '\n';
  for (const RunRecord& r : rep.runs)
    for (std::size_t i = 0; i < r.trajectory.states.size(); ++i) {
      const Eigen::MatrixXd& X = r.trajectory.states[i];
      const Eigen::MatrixXd& U = r.trajectory.controls[i];
      for (int t = 0; t < X.cols(); ++t) {
        tr << r.run_id << ',' << i << ',' << t;
        for (int a = 0; a < d; ++a) tr << ',' << csv17(X(a, t));
        for (int a = 0; a < m; ++a) tr << ',' << (t < U.cols() ? csv17(U(a, t)) : "");
        tr << '\n';
      }
    }
  write_text(base / "trajectories.csv", tr.str());

  std::ostringstream sw;
  sw << "eps,control_cost,gw_distance\n";
  for (const SweepRow& s : rep.sweep)
    sw << csv17(s.eps) << ',' << (s.ok ? csv17(s.control_cost) : "") << ',' << (s.ok ? csv17(s.gw_distance) : "")
       << '\n';
  write_text(base / "sweep.csv", sw.str());

  std::ostringstream ce;
  ce << "run_id,ratio,rank_gap\n";
  for (const RunRecord& r : rep.runs)
    ce << r.run_id << ',' << csv17(r.certificate.ratio) << ',' << csv17(r.certificate.rank_gap) << '\n';
  write_text(base / "certificates.csv", ce.str());
}

std::vector<RecomputedRun> certify_report(const ExperimentReport& rep) {
  const ScenarioConfig cfg = parse_config(rep.config);
  std::vector<RecomputedRun> out;
  for (const RunRecord& r : rep.runs) {
    RecomputedRun rr;
    rr.run_id = r.run_id;
    rr.stored = r.certificate;
    rr.gw_stored = r.gw;
    rr.rho_stored = r.rho;
    const LossTensor G = build_loss_tensor(pairwise_cost(r.xd, cfg.cost), r.reference);
    rr.recomputed = certify(r.P, r.relaxed, G, cfg.outer.sdp.cert);
    rr.gw_recomputed = r.polished ? gw_objective(r.P, G) : (r.relaxed.Qhat.array() * G.entries.array()).sum();

    const SteeringModel model(cfg.system, cfg.T, cfg.R, cfg.state_box, cfg.control_box, cfg.outer.qp_tol);
    rr.rho_recomputed = 0.0;
    for (int i = 0; i < r.xd.size(); ++i) rr.rho_recomputed += model.solve(r.x0.point(i), r.xd.point(i), i).cost;

    auto close = [](double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); };
    rr.match = close(rr.recomputed.ratio, rr.stored.ratio, 1e-9) && close(rr.recomputed.rank_gap, rr.stored.rank_gap, 1e-6) &&
               rr.recomputed.is_global == rr.stored.is_global && close(rr.gw_recomputed, rr.gw_stored, 1e-9) &&
               close(rr.rho_recomputed, rr.rho_stored, 1e-6);
    out.push_back(rr);
  }
  return out;
}

}  // namespace gwsteer
