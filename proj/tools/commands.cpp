#include "commands.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "percweb/percweb.hpp"

namespace percweb::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Replicas used for pilot estimates of sigma live far away from the
// replica ids used for the main experiment.
constexpr std::uint64_t kPilotReplicaBase = std::uint64_t{1} << 32;
constexpr std::int64_t kPilotReplicas = 16;
constexpr std::int64_t kPilotLevels = 100'000;

double single_p(const ExperimentSpec& s) {
  if (s.p.size() != 1) throw SpecError(s.command + " takes exactly one p");
  return s.p.front();
}

std::ofstream open_file(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  return f;
}

void finish(std::ostream& f, const std::string& what) {
  f.flush();
  if (!f) throw IoError("write failed: " + what);
}

/// Writes `text` to spec.out or to `fallback`.
void emit(const ExperimentSpec& spec, const std::string& text, std::ostream& fallback) {
  if (spec.out.empty()) {
    fallback << text;
    finish(fallback, "stdout");
    return;
  }
  auto f = open_file(spec.out);
  f << text;
  finish(f, spec.out);
}

std::string csv_header(const ExperimentSpec& spec, const char* columns) {
  return "# spec_hash=" + spec_hash(spec) + "\n" + columns + "\n";
}

double pilot_sigma(const ExperimentSpec& spec, double p) {
  if (spec.sigma) return *spec.sigma;
  std::vector<Config> cfgs;
  for (std::int64_t r = 0; r < kPilotReplicas; ++r)
    cfgs.emplace_back(spec.seed, p, replica_stream(kPilotReplicaBase + static_cast<std::uint64_t>(r)));
  const auto est = estimate_from_replicas(cfgs, kPilotLevels, spec.margin, spec.workers);
  if (!(est.estimate.sigma_hat > 0)) throw SpecError("sigma estimate is zero at this p; pass --sigma");
  return est.estimate.sigma_hat;
}

int cmd_simulate(const ExperimentSpec& spec, std::ostream&) {
  if (spec.out.empty()) throw SpecError("simulate needs --out <directory>");
  const double p = single_p(spec);
  std::error_code ec;
  fs::create_directories(spec.out, ec);
  if (ec) throw IoError("cannot create " + spec.out + ": " + ec.message());
  const std::string hash = spec_hash(spec);
  struct Traj {
    std::vector<std::int64_t> r, l, gamma;
  };
  auto trajs = parallel_map(spec.replicas, spec.workers, [&](std::int64_t i) {
    const Config cfg(spec.seed, p, replica_stream(static_cast<std::uint64_t>(i)));
    ClusterState s({0, 0});
    Traj t;
    try {
      s.advance_to(spec.n, cfg);
      t.l = s.left_boundary();
      s.advance_to(spec.horizon, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "replica " + std::to_string(i) + ": " + e.detail());
    }
    const auto r = s.right_boundary();
    t.r.assign(r.begin(), r.begin() + spec.n + 1);
    t.gamma = s.left_boundary();
    return t;
  });
  json files = json::array();
  for (std::int64_t i = 0; i < spec.replicas; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "trajectory_%06" PRId64 ".csv", i);
    const auto& t = trajs[static_cast<std::size_t>(i)];
    std::string text = csv_header(spec, "j,r_j,l_j,gamma_j");
    for (std::int64_t j = 0; j <= spec.n; ++j) {
      const auto k = static_cast<std::size_t>(j);
      text += std::to_string(j) + "," + std::to_string(t.r[k]) + "," + std::to_string(t.l[k]) + "," +
              std::to_string(t.gamma[k]) + "\n";
    }
    auto f = open_file(fs::path(spec.out) / name);
    f << text;
    finish(f, name);
    files.push_back({{"replica", i},
                     {"file", name},
                     {"stream_id", replica_stream(static_cast<std::uint64_t>(i))},
                     {"r_n", t.r.back()}});
  }
  json manifest{{"spec_hash", hash}, {"spec", to_json(spec, false)}, {"row_count", spec.replicas}, {"files", files}};
  auto f = open_file(fs::path(spec.out) / "manifest.json");
  f << manifest.dump(2) << "\n";
  finish(f, "manifest.json");
  return kOk;
}

int cmd_estimate(const ExperimentSpec& spec, std::ostream& out) {
  const double p = single_p(spec);
  const auto cfgs = replica_configs(spec.seed, p, 0, spec.replicas);
  const auto est = estimate_from_replicas(cfgs, spec.n, spec.margin, spec.workers);
  const auto& e = est.estimate;
  json j{{"p", p},
         {"n_records", e.n_records},
         {"alpha_hat", e.alpha_hat},
         {"alpha_se", e.alpha_se},
         {"sigma_hat", e.sigma_hat},
         {"sigma_se", e.sigma_se},
         {"ks_n", spec.replicas},
         {"ks_stat", nullptr},
         {"seeds_used", {{"seed", spec.seed}, {"replicas", spec.replicas}}},
         {"spec_hash", spec_hash(spec)}};
  if (e.sigma_hat > 0) {
    const double n = static_cast<double>(spec.n);
    std::vector<double> z;
    for (auto r : est.endpoints) z.push_back((static_cast<double>(r) - e.alpha_hat * n) / (e.sigma_hat * std::sqrt(n)));
    j["ks_stat"] = stats::ks_normal(z);
  }
  emit(spec, j.dump() + "\n", out);
  return kOk;
}

int cmd_coalesce(const ExperimentSpec& spec, std::ostream& out) {
  const double p = single_p(spec);
  const double sigma = pilot_sigma(spec, p);
  std::string text = csv_header(spec, "eps,t,empirical_survival,baseline_erf,n_replicas,n_censored");
  for (double delta : spec.delta) {
    for (double eps : spec.eps) {
      auto gap = static_cast<std::int64_t>(std::llround(delta * sigma / std::sqrt(eps)));
      if (gap % 2) gap += (delta * sigma / std::sqrt(eps) > static_cast<double>(gap)) ? 1 : -1;
      gap = std::max<std::int64_t>(gap, 2);
      const double e1[1] = {eps};
      for (const auto& row : coalescence_survival_curve(gap, p, e1, spec.t, spec.replicas, sigma, spec.seed,
                                                        spec.workers))
        text += format_double(row.eps) + "," + format_double(row.t) + "," + format_double(row.empirical_survival) +
                "," + format_double(row.baseline_erf) + "," + std::to_string(row.n_replicas) + "," +
                std::to_string(row.n_censored) + "\n";
    }
  }
  emit(spec, text, out);
  return kOk;
}

int cmd_eta(const ExperimentSpec& spec, std::ostream& out) {
  const double p = single_p(spec);
  const std::string hash = spec_hash(spec);
  std::string text;
  if (!spec.eps.empty()) {
    const double sigma = pilot_sigma(spec, p);
    for (double eps : spec.eps)
      for (double t : spec.t)
        for (const auto& row : b1_battery(p, eps, t, spec.delta, spec.replicas, sigma, spec.seed, spec.workers)) {
          json j{{"battery", "b1"},  {"eps", eps},           {"t", row.t},
                 {"delta", row.delta}, {"lattice_gap", row.lattice_gap}, {"steps", row.steps},
                 {"estimate", row.estimate}, {"ci_low", row.ci_low}, {"ci_high", row.ci_high},
                 {"n", row.n},         {"baseline_erf", row.baseline}, {"spec_hash", hash}};
          text += j.dump() + "\n";
        }
  }
  const auto f = b2_fkg_check(p, spec.n, spec.x, spec.replicas, spec.seed, spec.workers);
  auto line = [&](const char* q, double est, stats::Interval ci) {
    json j{{"battery", "b2"}, {"quantity", q},      {"steps", f.n},        {"x", f.x},
           {"estimate", est}, {"ci_low", ci.low}, {"ci_high", ci.high}, {"n", f.replicas},
           {"spec_hash", hash}};
    text += j.dump() + "\n";
  };
  line("p_eta_ge_3", f.p3, f.p3_ci);
  line("p_eta_ge_2", f.p2, f.p2_ci);
  line("p_eta_ge_2_squared", f.p2 * f.p2, f.p2_squared_ci);
  json verdict{{"battery", "b2"}, {"quantity", "fkg_margin"}, {"estimate", f.margin()},
               {"holds", f.holds()}, {"n", f.replicas}, {"spec_hash", hash}};
  text += verdict.dump() + "\n";
  emit(spec, text, out);
  return kOk;
}

struct CheckRow {
  std::string status;
  std::int64_t level = -1;
  std::int64_t explore = 0;
  std::int64_t oracle = 0;
};

// Compares r(j) for all j and l^n at the final level against the box oracle.
CheckRow check_one(const Config& cfg, std::int64_t n, bool inject) {
  CheckRow row;
  const auto box = oracle::make_box(cfg, 0, 0, n);
  std::optional<oracle::BoxBoundary> dp;
  try {
    dp = oracle::dp_right_boundary(box, 0, 0, n);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BoxTooNarrow) throw;
    row.status = "box_too_narrow";
    return row;
  }
  std::optional<ClusterState> s;
  try {
    s = explore_to_level({0, 0}, n, cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ScanLimitExceeded) throw;
    row.status = dp->dead ? "dead_agree" : "dead_disagree";
    row.level = dp->dead.value_or(-1);
    return row;
  }
  if (dp->dead) {
    row.status = "dead_disagree";
    row.level = *dp->dead;
    return row;
  }
  std::vector<std::int64_t> r(s->right_boundary().begin(), s->right_boundary().end());
  if (inject) r.back() += 1;
  auto l = s->left_boundary();
  const auto path = oracle::dp_rightmost_path(box, 0, 0, n);
  for (std::int64_t j = 0; j <= n; ++j) {
    const auto k = static_cast<std::size_t>(j);
    if (r[k] != dp->r[k]) return {"mismatch_r", j, r[k], dp->r[k]};
    if (l[k] != path[k]) return {"mismatch_l", j, l[k], path[k]};
  }
  row.status = "pass";
  return row;
}

int cmd_check(const ExperimentSpec& spec, std::ostream& out) {
  std::string text = csv_header(spec, "p,seed,status,level,explore,oracle");
  bool failed = false;
  for (double p : spec.p) {
    auto rows = parallel_map(spec.replicas, spec.workers, [&](std::int64_t i) {
      const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(i);
      return check_one(Config(seed, p, 0), spec.n, spec.fault_seed && *spec.fault_seed == static_cast<std::int64_t>(seed));
    });
    for (std::int64_t i = 0; i < spec.replicas; ++i) {
      const auto& r = rows[static_cast<std::size_t>(i)];
      failed |= r.status == "mismatch_r" || r.status == "mismatch_l" || r.status == "dead_disagree";
      text += format_double(p) + "," + std::to_string(spec.seed + static_cast<std::uint64_t>(i)) + "," + r.status +
              "," + std::to_string(r.level) + "," + std::to_string(r.explore) + "," + std::to_string(r.oracle) + "\n";
    }
  }
  emit(spec, text, out);
  return failed ? kCheckFailed : kOk;
}

void check_positive(bool ok, const char* what) {
  if (!ok) throw SpecError(what);
}

std::vector<double> default_t_grid() {
  std::vector<double> t;
  for (int k = 1; k <= 20; ++k) t.push_back(0.1 * k);
  return t;
}

template <class T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SpecError(std::string("field '") + key + "': " + e.what());
  }
}

std::vector<double> number_or_list(const json& v, const char* key) {
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw SpecError(std::string("field '") + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  throw SpecError(std::string("field '") + key + "' must be a number or a list of numbers");
}

json list_or_number(const std::vector<double>& v) {
  if (v.size() == 1) return v.front();
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void normalize(ExperimentSpec& s) {
  bool known = false;
  for (const auto& c : commands()) known |= c == s.command;
  if (!known) throw SpecError("unknown command '" + s.command + "'");
  if (s.p.empty()) s.p = s.command == "check" ? std::vector<double>{0.7, 0.8, 0.9} : std::vector<double>{0.8};
  const bool check = s.command == "check";
  if (s.replicas == 0) s.replicas = check ? 200 : 100;
  if (s.n == 0) s.n = check ? 50 : 1000;
  for (double p : s.p) check_positive(p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
  check_positive(s.replicas >= 1, "replicas must be at least 1");
  check_positive(s.n >= 1, "n must be at least 1");
  check_positive(s.margin >= 1, "margin must be at least 1");
  check_positive(s.x >= 1, "x must be at least 1");
  check_positive(s.workers >= 1, "workers must be at least 1");
  if (s.sigma) check_positive(*s.sigma > 0, "sigma must be positive");
  for (double e : s.eps) check_positive(e > 0, "eps values must be positive");
  for (double d : s.delta) check_positive(d > 0, "delta values must be positive");
  for (double t : s.t) check_positive(t > 0, "t values must be positive");
  if (s.command == "simulate") {
    if (s.horizon == 0) s.horizon = 4 * s.n;
    check_positive(s.horizon >= s.n, "horizon must be at least n");
  } else if (s.horizon != 0) {
    throw SpecError("horizon applies to simulate only");
  }
  if (s.command == "coalesce") {
    if (s.eps.empty()) s.eps = {1e-3};
    if (s.delta.empty()) s.delta = {1.0};
  }
  if ((s.command == "coalesce" || s.command == "eta") && s.t.empty()) s.t = default_t_grid();
  if (s.command == "eta" && !s.eps.empty() && s.delta.empty()) throw SpecError("eta with eps needs delta values");
  if (s.fault_seed && s.command != "check") throw SpecError("fault_seed applies to check only");
}

json to_json(const ExperimentSpec& s, bool with_runtime) {
  json j{{"command", s.command}, {"p", list_or_number(s.p)}, {"seed", s.seed}, {"replicas", s.replicas},
         {"n", s.n},             {"horizon", s.horizon},     {"margin", s.margin}, {"eps", s.eps},
         {"delta", s.delta},     {"t", s.t},                 {"x", s.x}};
  if (s.sigma) j["sigma"] = *s.sigma;
  if (s.fault_seed) j["fault_seed"] = *s.fault_seed;
  if (with_runtime) {
    j["out"] = s.out;
    j["workers"] = s.workers;
  }
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  ExperimentSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "command") s.command = get_field<std::string>(j, "command");
    else if (key == "p") s.p = number_or_list(v, "p");
    else if (key == "seed") s.seed = get_field<std::uint64_t>(j, "seed");
    else if (key == "replicas") s.replicas = get_field<std::int64_t>(j, "replicas");
    else if (key == "n") s.n = get_field<std::int64_t>(j, "n");
    else if (key == "horizon") s.horizon = get_field<std::int64_t>(j, "horizon");
    else if (key == "margin") s.margin = get_field<std::int64_t>(j, "margin");
    else if (key == "eps") s.eps = number_or_list(v, "eps");
    else if (key == "delta") s.delta = number_or_list(v, "delta");
    else if (key == "t") s.t = number_or_list(v, "t");
    else if (key == "x") s.x = get_field<std::int64_t>(j, "x");
    else if (key == "sigma") s.sigma = get_field<double>(j, "sigma");
    else if (key == "fault_seed") s.fault_seed = get_field<std::int64_t>(j, "fault_seed");
    else if (key == "out") s.out = get_field<std::string>(j, "out");
    else if (key == "workers") s.workers = get_field<int>(j, "workers");
    else throw SpecError("unknown spec field '" + key + "'");
  }
  return s;
}

std::string spec_hash(const ExperimentSpec& spec) {
  const std::string canon = to_json(spec, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

int execute(const ExperimentSpec& spec, std::ostream& out) {
  if (spec.command == "simulate") return cmd_simulate(spec, out);
  if (spec.command == "estimate") return cmd_estimate(spec, out);
  if (spec.command == "coalesce") return cmd_coalesce(spec, out);
  if (spec.command == "eta") return cmd_eta(spec, out);
  if (spec.command == "check") return cmd_check(spec, out);
  throw SpecError("unknown command '" + spec.command + "'");
}

int main_with_args(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Oriented percolation exploration clusters and Brownian web diagnostics"};
  app.require_subcommand(1);
  struct Flags {
    std::vector<double> p, eps, delta, t;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> replicas, n, horizon, margin, x, fault_seed;
    std::optional<double> sigma;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::string spec_file;
  } f;
  for (const auto& name : commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--p", f.p, "edge probability (check accepts several)");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--replicas", f.replicas, "independent replicas (seeds for check)");
    sub->add_option("--n", f.n, "levels");
    sub->add_option("--horizon", f.horizon, "simulate: level of the gamma surrogate (default 4n)");
    sub->add_option("--margin", f.margin, "survival margin beyond n for break points");
    sub->add_option("--eps", f.eps, "scaling parameters");
    sub->add_option("--delta", f.delta, "rescaled gaps");
    sub->add_option("--x", f.x, "eta: number of gaps 2x for the FKG check");
    sub->add_option("--t", f.t, "rescaled times");
    sub->add_option("--sigma", f.sigma, "use this sigma instead of a pilot estimate");
    sub->add_option("--out", f.out, "output file (directory for simulate)");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--spec", f.spec_file, "JSON spec file; flags override its fields");
    if (name == "check") sub->add_option("--fault-seed", f.fault_seed, "perturb the result for this seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidSpec;
  }
  try {
    ExperimentSpec spec;
    const std::string command = app.get_subcommands().front()->get_name();
    if (!f.spec_file.empty()) {
      std::ifstream in(f.spec_file, std::ios::binary);
      if (!in) throw IoError("cannot read spec file " + f.spec_file);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw SpecError(std::string("spec file is not valid JSON: ") + e.what());
      }
      spec = spec_from_json(j);
      if (!spec.command.empty() && spec.command != command)
        throw SpecError("spec file is for '" + spec.command + "', not '" + command + "'");
    }
    spec.command = command;
    if (!f.p.empty()) spec.p = f.p;
    if (!f.eps.empty()) spec.eps = f.eps;
    if (!f.delta.empty()) spec.delta = f.delta;
    if (!f.t.empty()) spec.t = f.t;
    if (f.seed) spec.seed = *f.seed;
    if (f.replicas) spec.replicas = *f.replicas;
    if (f.n) spec.n = *f.n;
    if (f.horizon) spec.horizon = *f.horizon;
    if (f.margin) spec.margin = *f.margin;
    if (f.x) spec.x = *f.x;
    if (f.fault_seed) spec.fault_seed = *f.fault_seed;
    if (f.sigma) spec.sigma = *f.sigma;
    if (f.out) spec.out = *f.out;
    if (f.workers) spec.workers = *f.workers;
    normalize(spec);
    return execute(spec, out);
  } catch (const SpecError& e) {
    err << "invalid spec: " << e.what() << "\n";
    return kInvalidSpec;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << e.what() << "\n";
    if (e.code() == ErrorCode::ScanLimitExceeded) return kGuardTripped;
    return kInvalidSpec;
  }
}

}  // namespace percweb::cli
