#include "gwsteer/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "gwsteer/errors.hpp"

namespace gwsteer {

using nlohmann::json;

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  return static_cast<double>(counter_hash(seed, counter) >> 11) * 0x1.0p-53;
}

PointCloud sample_cloud(const SamplerSpec& spec, int N, std::uint64_t seed) {
  const int d = static_cast<int>(spec.lower.size());
  Eigen::MatrixXd pts(d, N);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < d; ++a) {
      const double u = counter_uniform(seed, static_cast<std::uint64_t>(i) * d + a);
      pts(a, i) = spec.lower(a) + (spec.upper(a) - spec.lower(a)) * u;
    }
  return PointCloud(pts);
}

PointCloud target_cloud(const TargetSpec& spec, int N, int d) {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(d, N);
  if (spec.shape == "points") {
    if (spec.points.rows() != d || spec.points.cols() != N) throw InputError("target points have the wrong shape");
    return PointCloud(spec.points);
  }
  if (spec.shape == "circle") {
    if (d < 2) throw InputError("circle target needs dimension >= 2");
    const double pi = std::acos(-1.0);
    for (int i = 0; i < N; ++i) {
      const double u = spec.jitter != 0.0 ? counter_uniform(spec.seed, i) - 0.5 : 0.0;
      const double ang = spec.phase + 2.0 * pi * (i + spec.jitter * u) / N;
      pts(0, i) = spec.center(0) + spec.radius * std::cos(ang);
      pts(1, i) = spec.center(1) + spec.radius * std::sin(ang);
      for (int a = 2; a < d; ++a) pts(a, i) = spec.center(a);
    }
    return PointCloud(pts);
  }
  if (spec.shape == "line") {
    for (int i = 0; i < N; ++i) {
      const double s = N == 1 ? 0.0 : static_cast<double>(i) / (N - 1);
      pts.col(i) = spec.start + s * (spec.end - spec.start);
    }
    return PointCloud(pts);
  }
  throw InputError("unknown target shape '" + spec.shape + "'");
}

std::string to_string(MetricMode m) {
  return m == MetricMode::euclidean_target ? "euclidean_target" : "graph_groups";
}

namespace {

// Strict object reader: every key must be consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }
  ~Obj() = default;

  [[noreturn]] void fail(const std::string& what) const { throw InputError("config." + path_ + ": " + what); }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }
  const json& get(const std::string& key) {
    if (!has(key)) throw InputError("config." + sub(key) + ": required field missing");
    return j_.at(key);
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw InputError("config." + sub(it.key()) + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double num(const json& v, const std::string& path) {
  if (!v.is_number()) throw InputError("config." + path + ": must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw InputError("config." + path + ": must be finite");
  return x;
}

long long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw InputError("config." + path + ": must be an integer");
  return v.get<long long>();
}

std::uint64_t seed_value(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    throw InputError("config." + path + ": must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool boolean(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw InputError("config." + path + ": must be a boolean");
  return v.get<bool>();
}

std::string str(const json& v, const std::string& path) {
  if (!v.is_string()) throw InputError("config." + path + ": must be a string");
  return v.get<std::string>();
}

Eigen::VectorXd vec(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw InputError("config." + path + ": must be a non-empty array of numbers");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = num(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

// rows of numbers -> matrix
Eigen::MatrixXd mat(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw InputError("config." + path + ": must be a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) throw InputError("config." + path + ": rows must be non-empty arrays");
  Eigen::MatrixXd out(v.size(), cols);
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) throw InputError("config." + rp + ": ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = num(v[r][c], rp + "[" + std::to_string(c) + "]");
  }
  return out;
}

Box box(const json& v, int dim, const std::string& path) {
  Box b;
  if (v.is_number()) b.half_width = Eigen::VectorXd::Constant(dim, num(v, path));
  else b.half_width = vec(v, path);
  if (b.half_width.size() != dim)
    throw InputError("config." + path + ": expected " + std::to_string(dim) + " half-widths");
  for (int a = 0; a < dim; ++a)
    if (!(b.half_width(a) > 0)) throw InputError("config." + path + ": half-widths must be positive");
  return b;
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

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

SolveMethod method_from_string(const std::string& s, const std::string& path) {
  if (s == "automatic") return SolveMethod::automatic;
  if (s == "interior_point") return SolveMethod::interior_point;
  if (s == "face_splitting") return SolveMethod::face_splitting;
  throw InputError("config." + path + ": unknown method '" + s + "'");
}

std::string method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::interior_point: return "interior_point";
    case SolveMethod::face_splitting: return "face_splitting";
    default: return "automatic";
  }
}

}  // namespace

ScenarioConfig parse_config(const json& root) {
  ScenarioConfig cfg;
  Obj top(root, "");

  {
    Obj sys(top.get("system"), "system");
    cfg.system.A = mat(sys.get("A"), "system.A");
    cfg.system.B = mat(sys.get("B"), "system.B");
    sys.finish();
    if (cfg.system.A.rows() != cfg.system.A.cols()) throw InputError("config.system.A: must be square");
    if (cfg.system.B.rows() != cfg.system.A.rows()) throw InputError("config.system.B: row count must match A");
  }
  cfg.d = static_cast<int>(cfg.system.A.rows());
  const int m = static_cast<int>(cfg.system.B.cols());
  if (top.has("dimension") && integer(top.get("dimension"), "dimension") != cfg.d)
    throw InputError("config.dimension: does not match system.A");

  const long long T = integer(top.get("horizon"), "horizon");
  if (T < 1) throw InputError("config.horizon: must be >= 1");
  cfg.T = static_cast<int>(T);
  const long long N = integer(top.get("agents"), "agents");
  if (N < 2) throw InputError("config.agents: must be >= 2");
  cfg.N = static_cast<int>(N);

  cfg.R = top.has("R") ? mat(top.get("R"), "R") : Eigen::MatrixXd::Identity(m, m);
  if (cfg.R.rows() != m || cfg.R.cols() != m) throw InputError("config.R: must be m x m with m = inputs");

  const bool has_eps = top.has("eps"), has_list = top.has("eps_list");
  if (has_eps == has_list) throw InputError("config.eps: exactly one of eps and eps_list is required");
  if (has_eps) {
    cfg.eps_list = {num(top.get("eps"), "eps")};
  } else {
    const json& l = top.get("eps_list");
    if (!l.is_array() || l.empty()) throw InputError("config.eps_list: must be a non-empty array");
    for (std::size_t i = 0; i < l.size(); ++i) cfg.eps_list.push_back(num(l[i], "eps_list[" + std::to_string(i) + "]"));
    cfg.eps_is_list = true;
  }
  for (double e : cfg.eps_list)
    if (!(e > 0)) throw InputError("config.eps: values must be positive");
  for (std::size_t i = 1; i < cfg.eps_list.size(); ++i)
    if (!(cfg.eps_list[i] > cfg.eps_list[i - 1])) throw InputError("config.eps_list: must be sorted ascending");

  {
    Obj b(top.get("boxes"), "boxes");
    cfg.state_box = box(b.get("state"), cfg.d, "boxes.state");
    cfg.control_box = box(b.get("control"), m, "boxes.control");
    cfg.terminal_box = box(b.get("terminal"), cfg.d, "boxes.terminal");
    b.finish();
  }

  {
    Obj ic(top.get("initial_cloud"), "initial_cloud");
    const bool pts = ic.has("points"), smp = ic.has("sampler");
    if (pts == smp) ic.fail("exactly one of points and sampler is required");
    if (pts) {
      cfg.explicit_initial = true;
      cfg.initial_points = mat(ic.get("points"), "initial_cloud.points").transpose();
      if (cfg.initial_points.cols() != cfg.N)
        throw InputError("config.initial_cloud.points: has " + std::to_string(cfg.initial_points.cols()) +
                         " points but agents = " + std::to_string(cfg.N));
      if (cfg.initial_points.rows() != cfg.d) throw InputError("config.initial_cloud.points: wrong dimension");
    } else {
      Obj s(ic.get("sampler"), "initial_cloud.sampler");
      cfg.sampler.lower = vec(s.get("lower"), "initial_cloud.sampler.lower");
      cfg.sampler.upper = vec(s.get("upper"), "initial_cloud.sampler.upper");
      s.finish();
      if (cfg.sampler.lower.size() != cfg.d || cfg.sampler.upper.size() != cfg.d)
        throw InputError("config.initial_cloud.sampler: bounds must have the state dimension");
      for (int a = 0; a < cfg.d; ++a)
        if (!(cfg.sampler.lower(a) <= cfg.sampler.upper(a)))
          throw InputError("config.initial_cloud.sampler: lower must not exceed upper");
    }
    ic.finish();
  }

  if (top.has("metric")) {
    Obj mo(top.get("metric"), "metric");
    if (mo.has("mode")) {
      const std::string mode = str(mo.get("mode"), "metric.mode");
      if (mode == "euclidean_target") cfg.metric_mode = MetricMode::euclidean_target;
      else if (mode == "graph_groups") cfg.metric_mode = MetricMode::graph_groups;
      else throw InputError("config.metric.mode: unknown mode '" + mode + "'");
    }
    if (mo.has("cost")) {
      cfg.cost = cost_kind_from_string(str(mo.get("cost"), "metric.cost"));
      if (cfg.cost == CostKind::graph) throw InputError("config.metric.cost: graph cost cannot apply to agents");
    }
    const bool g = mo.has("groups");
    const bool wi = mo.has("intra_weight"), we = mo.has("inter_weight");
    if (cfg.metric_mode == MetricMode::graph_groups) {
      if (!g) throw InputError("config.metric.groups: required for graph_groups");
      const json& gl = mo.get("groups");
      if (!gl.is_array()) throw InputError("config.metric.groups: must be an array");
      for (std::size_t i = 0; i < gl.size(); ++i)
        cfg.groups.group_of.push_back(static_cast<int>(integer(gl[i], "metric.groups[" + std::to_string(i) + "]")));
      if (wi) cfg.groups.intra_weight = num(mo.get("intra_weight"), "metric.intra_weight");
      if (we) cfg.groups.inter_weight = num(mo.get("inter_weight"), "metric.inter_weight");
      if (static_cast<int>(cfg.groups.group_of.size()) != cfg.N)
        throw InputError("config.metric.groups: length must equal agents");
    } else if (g || wi || we) {
      throw InputError("config.metric.groups: only valid with mode graph_groups");
    }
    mo.finish();
  }

  if (top.has("target")) {
    Obj t(top.get("target"), "target");
    cfg.has_target = true;
    cfg.target.shape = t.has("shape") ? str(t.get("shape"), "target.shape") : "points";
    const std::string& sh = cfg.target.shape;
    if (sh == "points") {
      cfg.target.points = mat(t.get("points"), "target.points").transpose();
      if (cfg.target.points.cols() != cfg.N)
        throw InputError("config.target.points: has " + std::to_string(cfg.target.points.cols()) +
                         " points but agents = " + std::to_string(cfg.N));
      if (cfg.target.points.rows() != cfg.d) throw InputError("config.target.points: wrong dimension");
    } else if (sh == "circle") {
      if (cfg.d < 2) throw InputError("config.target.shape: circle needs dimension >= 2");
      if (t.has("radius")) cfg.target.radius = num(t.get("radius"), "target.radius");
      if (!(cfg.target.radius > 0)) throw InputError("config.target.radius: must be positive");
      cfg.target.center = t.has("center") ? vec(t.get("center"), "target.center") : Eigen::VectorXd::Zero(cfg.d);
      if (cfg.target.center.size() != cfg.d) throw InputError("config.target.center: wrong dimension");
      if (t.has("phase")) cfg.target.phase = num(t.get("phase"), "target.phase");
      if (t.has("jitter")) cfg.target.jitter = num(t.get("jitter"), "target.jitter");
      if (!(cfg.target.jitter >= 0 && cfg.target.jitter < 1)) throw InputError("config.target.jitter: must lie in [0,1)");
      if (t.has("seed")) cfg.target.seed = seed_value(t.get("seed"), "target.seed");
    } else if (sh == "line") {
      cfg.target.start = vec(t.get("start"), "target.start");
      cfg.target.end = vec(t.get("end"), "target.end");
      if (cfg.target.start.size() != cfg.d || cfg.target.end.size() != cfg.d)
        throw InputError("config.target: line endpoints have the wrong dimension");
    } else {
      throw InputError("config.target.shape: unknown shape '" + sh + "'");
    }
    if (t.has("count") && integer(t.get("count"), "target.count") != cfg.N)
      throw InputError("config.target.count: must equal agents");
    t.finish();
  }
  if (cfg.metric_mode == MetricMode::euclidean_target && !cfg.has_target)
    throw InputError("config.target: required for metric mode euclidean_target");
  if (cfg.metric_mode == MetricMode::graph_groups && cfg.has_target)
    throw InputError("config.target: must be absent for metric mode graph_groups");

  if (top.has("solver")) {
    Obj s(top.get("solver"), "solver");
    OuterConfig& o = cfg.outer;
    if (s.has("sdp_tol")) o.sdp_tol = num(s.get("sdp_tol"), "solver.sdp_tol");
    if (s.has("qp_tol")) o.qp_tol = num(s.get("qp_tol"), "solver.qp_tol");
    if (s.has("sdp_method")) o.sdp.method = method_from_string(str(s.get("sdp_method"), "solver.sdp_method"), "solver.sdp_method");
    if (s.has("qhat_nonneg")) o.sdp.qhat_nonneg = boolean(s.get("qhat_nonneg"), "solver.qhat_nonneg");
    if (s.has("polish")) o.sdp.polish = boolean(s.get("polish"), "solver.polish");
    if (s.has("max_sdp_iters")) {
      const long long v = integer(s.get("max_sdp_iters"), "solver.max_sdp_iters");
      if (v < 0) throw InputError("config.solver.max_sdp_iters: must be >= 0");
      o.sdp.max_iter = static_cast<int>(v);
    }
    if (s.has("ratio_tol")) o.sdp.cert.ratio_tol = num(s.get("ratio_tol"), "solver.ratio_tol");
    if (s.has("rank_tol")) o.sdp.cert.rank_tol = num(s.get("rank_tol"), "solver.rank_tol");
    s.finish();
    if (!(o.sdp_tol > 0)) throw InputError("config.solver.sdp_tol: must be positive");
    if (!(o.qp_tol > 0)) throw InputError("config.solver.qp_tol: must be positive");
    if (!(o.sdp.cert.ratio_tol > 0) || !(o.sdp.cert.rank_tol > 0))
      throw InputError("config.solver: certificate tolerances must be positive");
  }

  if (top.has("outer")) {
    Obj s(top.get("outer"), "outer");
    OuterConfig& o = cfg.outer;
    auto count = [&](const char* key, int& field) {
      if (s.has(key)) field = static_cast<int>(integer(s.get(key), std::string("outer.") + key));
    };
    auto real = [&](const char* key, double& field) {
      if (s.has(key)) field = num(s.get(key), std::string("outer.") + key);
    };
    count("max_outer_iters", o.max_outer_iters);
    count("max_inner_iters", o.max_inner_iters);
    count("max_backtracks", o.max_backtracks);
    if (s.has("step_rule")) o.step_rule = str(s.get("step_rule"), "outer.step_rule");
    real("initial_step", o.initial_step);
    real("shrink", o.shrink);
    real("sufficient_decrease", o.sufficient_decrease);
    real("delta_J_tol", o.delta_J_tol);
    real("fd_step", o.fd_step);
    if (s.has("seed")) o.seed = seed_value(s.get("seed"), "outer.seed");
    s.finish();
    try {
      o.validate();
    } catch (const InputError& e) {
      throw InputError(std::string("config.outer: ") + e.what());
    }
  }

  if (top.has("seed")) cfg.seed = seed_value(top.get("seed"), "seed");
  if (top.has("runs")) {
    const long long r = integer(top.get("runs"), "runs");
    if (r < 1) throw InputError("config.runs: must be >= 1");
    cfg.runs = static_cast<int>(r);
  }
  top.finish();
  cfg.validate();
  return cfg;
}

void ScenarioConfig::validate() const {
  system.validate();
  for (int a = 0; a < d; ++a) {
    if (!explicit_initial && (sampler.lower(a) < -state_box.half_width(a) || sampler.upper(a) > state_box.half_width(a)))
      throw InputError("config.initial_cloud.sampler: sampler box must lie inside the state box");
  }
  if (explicit_initial) {
    for (int i = 0; i < N; ++i)
      if (!state_box.contains(initial_points.col(i)))
        throw InputError("config.initial_cloud.points: point " + std::to_string(i + 1) + " lies outside the state box");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (R + R.transpose()));
  if (llt.info() != Eigen::Success || (R - R.transpose()).norm() > 1e-12 * std::max(1.0, R.norm()))
    throw InputError("config.R: must be symmetric positive definite");
  if (metric_mode == MetricMode::graph_groups) {
    try {
      groups.validate(N);
    } catch (const InputError& e) {
      throw InputError(std::string("config.metric: ") + e.what());
    }
  }
}

PointCloud ScenarioConfig::initial_cloud(int run) const {
  if (explicit_initial) return PointCloud(initial_points);
  return sample_cloud(sampler, N, seed + static_cast<std::uint64_t>(run));
}

MetricMatrix ScenarioConfig::reference(std::vector<std::string>* warnings) const {
  if (metric_mode == MetricMode::graph_groups) return graph_metric(groups, N, warnings);
  return pairwise_cost(target_cloud(target, N, d), cost);
}

Scenario ScenarioConfig::scenario(int run, double eps) const {
  Scenario sc;
  sc.system = system;
  sc.T = T;
  sc.R = R;
  sc.eps = eps;
  sc.state_box = state_box;
  sc.control_box = control_box;
  sc.terminal_box = terminal_box;
  sc.x0 = initial_cloud(run);
  sc.reference = reference();
  sc.moving_cost = cost;
  return sc;
}

json ScenarioConfig::echo() const {
  json j;
  j["system"] = {{"A", mat_json(system.A)}, {"B", mat_json(system.B)}};
  j["dimension"] = d;
  j["horizon"] = T;
  j["agents"] = N;
  j["R"] = mat_json(R);
  if (eps_is_list) {
    j["eps_list"] = eps_list;
  } else {
    j["eps"] = eps_list.front();
  }
  j["boxes"] = {{"state", vec_json(state_box.half_width)},
                {"control", vec_json(control_box.half_width)},
                {"terminal", vec_json(terminal_box.half_width)}};
  if (explicit_initial) {
    j["initial_cloud"] = {{"points", mat_json(initial_points.transpose())}};
  } else {
    j["initial_cloud"] = {{"sampler", {{"lower", vec_json(sampler.lower)}, {"upper", vec_json(sampler.upper)}}}};
  }
  json metric = {{"mode", to_string(metric_mode)}, {"cost", to_string(cost)}};
  if (metric_mode == MetricMode::graph_groups) {
    metric["groups"] = groups.group_of;
    metric["intra_weight"] = groups.intra_weight;
    metric["inter_weight"] = groups.inter_weight;
  }
  j["metric"] = metric;
  if (has_target) {
    json t = {{"shape", target.shape}};
    if (target.shape == "points") {
      t["points"] = mat_json(target.points.transpose());
    } else if (target.shape == "circle") {
      t["radius"] = target.radius;
      t["center"] = vec_json(target.center);
      t["phase"] = target.phase;
      t["jitter"] = target.jitter;
      t["seed"] = target.seed;
    } else {
      t["start"] = vec_json(target.start);
      t["end"] = vec_json(target.end);
    }
    j["target"] = t;
  }
  j["solver"] = {{"sdp_tol", outer.sdp_tol},
                 {"qp_tol", outer.qp_tol},
                 {"sdp_method", method_name(outer.sdp.method)},
                 {"qhat_nonneg", outer.sdp.qhat_nonneg},
                 {"polish", outer.sdp.polish},
                 {"max_sdp_iters", outer.sdp.max_iter},
                 {"ratio_tol", outer.sdp.cert.ratio_tol},
                 {"rank_tol", outer.sdp.cert.rank_tol}};
  j["outer"] = {{"max_outer_iters", outer.max_outer_iters},
                {"max_inner_iters", outer.max_inner_iters},
                {"max_backtracks", outer.max_backtracks},
                {"step_rule", outer.step_rule},
                {"initial_step", outer.initial_step},
                {"shrink", outer.shrink},
                {"sufficient_decrease", outer.sufficient_decrease},
                {"delta_J_tol", outer.delta_J_tol},
                {"fd_step", outer.fd_step},
                {"seed", outer.seed}};
  j["seed"] = seed;
  j["runs"] = runs;
  return j;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace gwsteer
