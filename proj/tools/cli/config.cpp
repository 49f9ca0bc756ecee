#include "config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "quasihom/error.hpp"
#include "quasihom/grps.hpp"
#include "quasihom/hash.hpp"

namespace quasihom::cli {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorCode::kConfigError, fmt::format("bad value '{}' for {}", value, key));
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  if (value == "inf") return NFunction::kInfinity;
  double out = 0.0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) bad_value(key, value);
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) bad_value(key, value);
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  const long long v = to_integer(key, value);
  if (v < INT32_MIN || v > INT32_MAX) bad_value(key, value);
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

template <class T, class F>
std::string join(const std::vector<T>& items, F&& format) {
  std::string out;
  for (const T& item : items) {
    if (!out.empty()) out += ',';
    out += format(item);
  }
  return out;
}

/// Wraps library parse errors (which use other codes) as config errors.
template <class F>
auto as_config(const std::string& key, const std::string& value, F&& parse) {
  try {
    return parse();
  } catch (const Error&) {
    bad_value(key, value);
  }
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"experiment",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.experiment = as_config(k, v, [&] { return parse_experiment(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.experiment)); }},
      {"domain.lx", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.lx = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.lx); }},
      {"domain.ly", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.ly = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.ly); }},
      {"mesh.nc", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.nc_x = c.problem.nc_y = to_int(k, v); },
       [](const RunConfig&) { return std::string(); }},
      {"mesh.nc_x", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.nc_x = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.problem.nc_x); }},
      {"mesh.nc_y", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.nc_y = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.problem.nc_y); }},
      {"mesh.levels", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.levels = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.problem.levels); }},
      {"coeff.kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "mstrig") {
           c.problem.coeff.kind = CoefficientKind::kMstrig;
         } else if (v == "constant") {
           c.problem.coeff.kind = CoefficientKind::kConstant;
         } else if (v == "grid") {
           c.problem.coeff.kind = CoefficientKind::kGrid;
         } else if (v == "channels") {
           c.problem.coeff.kind = CoefficientKind::kChannels;
         } else {
           bad_value(k, v);
         }
       },
       [](const RunConfig& c) { return std::string(to_string(c.problem.coeff.kind)); }},
      {"coeff.value", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.coeff.value = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.coeff.value); }},
      {"coeff.path", [](RunConfig& c, const std::string&, const std::string& v) { c.problem.coeff.path = v; },
       [](const RunConfig& c) { return c.problem.coeff.path.string(); }},
      {"coeff.rows", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.coeff.rows = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.problem.coeff.rows); }},
      {"coeff.cols", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.coeff.cols = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.problem.coeff.cols); }},
      {"coeff.channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.coeff.channels = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.problem.coeff.channels); }},
      {"coeff.contrast", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.coeff.contrast = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.coeff.contrast); }},
      {"coeff.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long seed = to_integer(k, v);
         if (seed < 0) bad_value(k, v);
         c.problem.coeff.seed = static_cast<std::uint64_t>(seed);
       },
       [](const RunConfig& c) { return std::to_string(c.problem.coeff.seed); }},
      {"source.kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "sinpi" && v != "sinbox" && v != "constant") bad_value(k, v);
         c.problem.source = v;
       },
       [](const RunConfig& c) { return c.problem.source; }},
      {"source.value", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.source_value = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.source_value); }},
      {"nfunc.kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.problem.nfunc_kind = as_config(k, v, [&] { return parse_nfunction_kind(v.c_str()); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.problem.nfunc_kind)); }},
      {"nfunc.p", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.p = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.p); }},
      {"nfunc.eps_minus_pow",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.eps_minus_pow = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.eps_minus_pow); }},
      {"nfunc.eps_plus", [](RunConfig& c, const std::string& k, const std::string& v) { c.problem.eps_plus = to_double(k, v); },
       [](const RunConfig& c) { return num(c.problem.eps_plus); }},
      {"solver.method",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.solver.method = as_config(k, v, [&] { return parse_method(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.solver.method)); }},
      {"solver.space",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.solver.space = as_config(k, v, [&] { return parse_space(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.solver.space)); }},
      {"solver.tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.tol = to_double(k, v); },
       [](const RunConfig& c) { return num(c.solver.tol); }},
      {"solver.max_iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.max_iters = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.solver.max_iters); }},
      {"solver.line_search",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.solver.line_search = as_config(k, v, [&] { return parse_line_search(v); });
       },
       [](const RunConfig& c) { return std::string(to_string(c.solver.line_search)); }},
      {"solver.delta", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.delta = to_double(k, v); },
       [](const RunConfig& c) { return num(c.solver.delta); }},
      {"solver.sparse_update",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.sparse_update = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.solver.sparse_update ? "true" : "false"); }},
      {"solver.sparse_update_threshold",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.update_threshold = to_double(k, v); },
       [](const RunConfig& c) { return num(c.solver.update_threshold); }},
      {"solver.inner_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.inner_tol = to_double(k, v); },
       [](const RunConfig& c) { return num(c.solver.inner_tol); }},
      {"solver.inner_max_iters",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.inner_max_iters = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.solver.inner_max_iters); }},
      {"solver.layers",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "default") {
           c.layers = kDefaultLayers;
         } else if (v == "global") {
           c.layers = kGlobalLayers;
         } else {
           c.layers = to_int(k, v);
           if (c.layers < 0) bad_value(k, v);
         }
       },
       [](const RunConfig& c) {
         return c.layers == kDefaultLayers ? std::string("default")
                : c.layers == kGlobalLayers ? std::string("global")
                                            : std::to_string(c.layers);
       }},
      {"solver.cq", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.cq = to_double(k, v); },
       [](const RunConfig& c) { return num(c.solver.cq); }},
      {"solver.estimate_cn",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.estimate_cn = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.solver.estimate_cn ? "true" : "false"); }},
      {"solver.alpha_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.alpha_max = to_double(k, v); },
       [](const RunConfig& c) { return num(c.solver.alpha_max); }},
      {"solver.linear",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "direct") {
           c.solver.linear.method = SpdMethod::kDirect;
         } else if (v == "pcg") {
           c.solver.linear.method = SpdMethod::kPcg;
         } else {
           bad_value(k, v);
         }
       },
       [](const RunConfig& c) { return std::string(c.solver.linear.method == SpdMethod::kDirect ? "direct" : "pcg"); }},
      {"solver.initial",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") {
           c.zero_initial_guess.reset();
         } else if (v == "poisson" || v == "zero") {
           c.zero_initial_guess = v == "zero";
         } else {
           bad_value(k, v);
         }
       },
       [](const RunConfig& c) {
         return std::string(!c.zero_initial_guess ? "auto" : *c.zero_initial_guess ? "zero" : "poisson");
       }},
      {"solver.reference", [](RunConfig& c, const std::string& k, const std::string& v) { c.reference = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.reference ? "true" : "false"); }},
      {"study.methods",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.study.methods.clear();
         for (const auto& item : split_list(v)) c.study.methods.push_back(as_config(k, v, [&] { return parse_method(item); }));
       },
       [](const RunConfig& c) { return join(c.study.methods, [](Method m) { return std::string(to_string(m)); }); }},
      {"study.nc_list",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.study.coarse_counts.clear();
         for (const auto& item : split_list(v)) c.study.coarse_counts.push_back(to_int(k, item));
       },
       [](const RunConfig& c) { return join(c.study.coarse_counts, [](int n) { return std::to_string(n); }); }},
      {"study.fine_exponent",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.study.fine_exponent = to_int(k, v); },
       [](const RunConfig& c) { return std::to_string(c.study.fine_exponent); }},
      {"study.eps_list",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.study.eps_minus_pows.clear();
         for (const auto& item : split_list(v)) c.study.eps_minus_pows.push_back(to_double(k, item));
       },
       [](const RunConfig& c) { return join(c.study.eps_minus_pows, num); }},
      {"study.thresholds",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.study.thresholds.clear();
         for (const auto& item : split_list(v)) c.study.thresholds.push_back(to_double(k, item));
       },
       [](const RunConfig& c) { return join(c.study.thresholds, num); }},
      {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
       [](const RunConfig&) { return std::string(); }},
      {"jobs", [](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = to_int(k, v); },
       [](const RunConfig&) { return std::string(); }},
  };
  return table;
}

}  // namespace

const char* to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::kSolve: return "solve";
    case Experiment::kCompareMethods: return "compare-methods";
    case Experiment::kHomogenizationError: return "homogenization-error";
    case Experiment::kRegularizationStudy: return "regularization-study";
    case Experiment::kSparseUpdateStudy: return "sparse-update-study";
  }
  return "?";
}

Experiment parse_experiment(const std::string& name) {
  for (Experiment e : {Experiment::kSolve, Experiment::kCompareMethods, Experiment::kHomogenizationError,
                       Experiment::kRegularizationStudy, Experiment::kSparseUpdateStudy}) {
    if (name == to_string(e)) return e;
  }
  fail(ErrorCode::kConfigError, "unknown experiment '" + name + "'");
}

NFunction ProblemSpec::nfunction() const {
  if (nfunc_kind == NFunctionKind::kPower) return NFunction::power(p);
  return NFunction::from_eps_pow(nfunc_kind, p, eps_minus_pow, eps_plus);
}

Source ProblemSpec::source_function() const {
  if (source == "sinpi") return [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
  if (source == "sinbox") {
    const double kx = M_PI / lx;
    const double ky = M_PI / ly;
    return [kx, ky](double x, double y) { return std::sin(kx * x) * std::sin(ky * y); };
  }
  const double value = source_value;
  return [value](double, double) { return value; };
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> out;
  for (const Key& key : keys()) {
    std::string value = key.get(*this);
    if (!value.empty()) out.emplace(key.name, std::move(value));
  }
  return out;
}

std::uint64_t RunConfig::fingerprint() const {
  Fnv1a hash;
  for (const auto& [key, value] : entries()) {
    hash.bytes(key.data(), key.size());
    hash.bytes("=", 1);
    hash.bytes(value.data(), value.size());
    hash.bytes("\n", 1);
  }
  return hash.digest();
}

void RunConfig::validate() const {
  const auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::kConfigError, what);
  };
  check(problem.lx > 0.0 && problem.ly > 0.0, "domain lengths must be positive");
  check(problem.nc_x >= 1 && problem.nc_y >= 1, "mesh.nc_x and mesh.nc_y must be >= 1");
  check(problem.levels >= 0 && problem.levels <= 10, "mesh.levels must be in [0, 10]");
  check(problem.p >= 2.0, "nfunc.p must be >= 2");
  check(problem.nfunc_kind == NFunctionKind::kPower || problem.p == 2.0 || problem.eps_minus_pow > 0.0,
        "nfunc.eps_minus_pow must be positive");
  check(problem.coeff.kind != CoefficientKind::kConstant || problem.coeff.value > 0.0, "coeff.value must be positive");
  if (problem.coeff.kind == CoefficientKind::kGrid) {
    check(!problem.coeff.path.empty(), "coeff.path is required for grid coefficients");
    check(problem.coeff.rows >= 1 && problem.coeff.cols >= 1, "coeff.rows and coeff.cols must be >= 1");
  }
  if (problem.coeff.kind == CoefficientKind::kChannels) {
    check(problem.coeff.channels >= 1, "coeff.channels must be >= 1");
    check(problem.coeff.contrast > 1.0, "coeff.contrast must exceed 1");
  }
  check(jobs >= 1, "jobs must be >= 1");
  check(layers >= 0 || layers == kGlobalLayers || layers == kDefaultLayers, "solver.layers");
  try {
    (void)problem.nfunction();
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, std::string("nfunc: ") + e.what());
  }
  solver.validate();

  // One refinement leaves the triangle indicators linearly dependent against
  // the fine hats (alternating +-1 on lower/upper triangles is orthogonal to
  // all of them), so coarse spaces need two.
  // homogenization-error sets its own levels, checked below.
  const bool coarse = solver.space == SpaceKind::kCoarse || experiment == Experiment::kSparseUpdateStudy;
  if (coarse && experiment != Experiment::kHomogenizationError) {
    check(problem.levels >= 2, "coarse spaces need mesh.levels >= 2");
  }

  switch (experiment) {
    case Experiment::kCompareMethods:
      check(!study.methods.empty(), "study.methods is empty");
      for (Method m : study.methods) {
        check(!(m == Method::kQuasinorm && solver.space == SpaceKind::kCoarse), "quasinorm has no coarse variant");
      }
      break;
    case Experiment::kHomogenizationError:
      check(!study.coarse_counts.empty(), "study.nc_list is empty");
      check(solver.method != Method::kQuasinorm, "quasinorm has no coarse variant");
      for (int nc : study.coarse_counts) {
        check(nc >= 1 && (nc & (nc - 1)) == 0, "study.nc_list entries must be powers of two");
        check(study.fine_exponent <= 12 && (1 << study.fine_exponent) >= 4 * nc,
              "study.fine_exponent must give at least two refinements of every coarse mesh");
      }
      break;
    case Experiment::kRegularizationStudy:
      check(!study.eps_minus_pows.empty(), "study.eps_list is empty");
      check(problem.nfunc_kind != NFunctionKind::kPower, "regularization-study needs a regularized nfunc.kind");
      for (double e : study.eps_minus_pows) check(e > 0.0, "study.eps_list entries must be positive");
      break;
    case Experiment::kSparseUpdateStudy:
      check(!study.thresholds.empty(), "study.thresholds is empty");
      check(solver.method != Method::kQuasinorm, "quasinorm has no coarse variant");
      for (double t : study.thresholds) check(t >= 0.0, "study.thresholds entries must be >= 0");
      break;
    case Experiment::kSolve:
      break;
  }
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, "cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfigError, fmt::format("{}:{}: expected key = value", path.string(), number));
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Key& k : keys()) {
    if (key == k.name) {
      k.set(config, key, value);
      return;
    }
  }
  fail(ErrorCode::kConfigError, "unknown config key '" + key + "'");
}

void apply(RunConfig& config, const std::map<std::string, std::string>& settings) {
  for (const auto& [key, value] : settings) apply(config, key, value);
}

int resolve_layers(const RunConfig& config, int nc_x) {
  if (config.layers != kDefaultLayers) return config.layers;
  return default_layers(config.problem.lx / nc_x);
}

}  // namespace quasihom::cli
