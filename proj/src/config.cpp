#include "bilevel/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bilevel/errors.hpp"

namespace bilevel {
namespace {

struct RawValue {
  std::string value;
  std::size_t line = 0;
};

using Section = std::map<std::string, RawValue>;

struct RawConfig {
  Section problem;
  std::vector<std::pair<std::string, Section>> algos;  // name -> keys
  Section run;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw FormatError("line " + std::to_string(line) + ": " + msg);
}

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  Section* current = nullptr;
  std::string current_name;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name == "problem") {
        current = &raw.problem;
        current_name = "problem";
      } else if (name == "run") {
        current = &raw.run;
        current_name = "run";
      } else if (name.rfind("algo.", 0) == 0) {
        const std::string algo_name = name.substr(5);
        if (algo_name.empty()) fail(line_no, "empty algo name");
        for (const auto& [existing, _] : raw.algos) {
          if (existing == algo_name) fail(line_no, "duplicate section [" + name + "]");
        }
        raw.algos.emplace_back(algo_name, Section{});
        current = &raw.algos.back().second;
        current_name = name;
      } else {
        fail(line_no, "unknown section [" + name + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    if (current == nullptr) fail(line_no, "key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (current->count(key) != 0) {
      fail(line_no, "duplicate key '" + current_name + "." + key + "'");
    }
    (*current)[key] = RawValue{value, line_no};
  }
  return raw;
}

// Typed readers. Each consumes the key from the section so leftovers can be
// reported as unknown.
class SectionReader {
 public:
  SectionReader(Section section, std::string path)
      : section_(std::move(section)), path_(std::move(path)) {}

  std::optional<RawValue> take(const std::string& key) {
    auto it = section_.find(key);
    if (it == section_.end()) return std::nullopt;
    RawValue v = it->second;
    section_.erase(it);
    return v;
  }

  double take_double(const std::string& key, double fallback) {
    auto v = take(key);
    if (!v) return fallback;
    return parse_double(*v, key);
  }

  std::int64_t take_int(const std::string& key, std::int64_t fallback) {
    auto v = take(key);
    if (!v) return fallback;
    return parse_int(*v, key);
  }

  std::size_t take_size(const std::string& key, std::size_t fallback) {
    auto v = take(key);
    if (!v) return fallback;
    const std::int64_t i = parse_int(*v, key);
    if (i < 0) fail(v->line, "key '" + path_ + "." + key + "' must be >= 0");
    return static_cast<std::size_t>(i);
  }

  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
    auto v = take(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    if (!parse_exact(v->value, out)) {
      fail(v->line, "bad unsigned integer for '" + path_ + "." + key + "'");
    }
    return out;
  }

  bool take_bool(const std::string& key, bool fallback) {
    auto v = take(key);
    if (!v) return fallback;
    if (v->value == "true" || v->value == "1") return true;
    if (v->value == "false" || v->value == "0") return false;
    fail(v->line, "bad boolean for '" + path_ + "." + key + "' (use true/false)");
  }

  std::string take_string(const std::string& key, std::string fallback) {
    auto v = take(key);
    if (!v) return fallback;
    return v->value;
  }

  std::optional<double> take_optional_double(const std::string& key) {
    auto v = take(key);
    if (!v) return std::nullopt;
    return parse_double(*v, key);
  }

  std::vector<std::uint64_t> take_u64_list(const std::string& key) {
    auto v = take(key);
    if (!v) return {};
    std::vector<std::uint64_t> out;
    std::stringstream ss(v->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      std::uint64_t x = 0;
      if (!parse_exact(item, x)) {
        fail(v->line, "bad list entry '" + item + "' for '" + path_ + "." + key + "'");
      }
      out.push_back(x);
    }
    return out;
  }

  InitSpec take_init(const std::string& key) {
    auto v = take(key);
    InitSpec init;
    if (!v) return init;
    if (v->value == "argmin") {
      init.kind = InitSpec::Kind::kArgmin;
      return init;
    }
    if (v->value.find(',') == std::string::npos) {
      init.kind = InitSpec::Kind::kScalar;
      double x = 0.0;
      if (!parse_exact(v->value, x)) {
        fail(v->line, "bad value for '" + path_ + "." + key + "'");
      }
      init.scalar = x;
      return init;
    }
    init.kind = InitSpec::Kind::kList;
    std::stringstream ss(v->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      double x = 0.0;
      if (!parse_exact(item, x)) {
        fail(v->line, "bad list entry '" + item + "' for '" + path_ + "." + key + "'");
      }
      init.list.push_back(x);
    }
    return init;
  }

  // No silent typo acceptance: anything left over is an error.
  void finish() const {
    if (!section_.empty()) {
      const auto& [key, v] = *section_.begin();
      fail(v.line, "unknown key '" + path_ + "." + key + "'");
    }
  }

 private:
  template <typename T>
  static bool parse_exact(const std::string& s, T& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
  }

  double parse_double(const RawValue& v, const std::string& key) {
    double out = 0.0;
    if (!parse_exact(v.value, out)) {
      fail(v.line, "bad number for '" + path_ + "." + key + "'");
    }
    return out;
  }

  std::int64_t parse_int(const RawValue& v, const std::string& key) {
    std::int64_t out = 0;
    if (!parse_exact(v.value, out)) {
      fail(v.line, "bad integer for '" + path_ + "." + key + "'");
    }
    return out;
  }

  Section section_;
  std::string path_;
};

AlgoBlock parse_algo(const std::string& name, Section section) {
  AlgoBlock a;
  a.name = name;
  if (name == "mrbo") a.kind = AlgoKind::kMrbo;
  else if (name == "vrbo") a.kind = AlgoKind::kVrbo;
  else if (name == "stocbio") a.kind = AlgoKind::kStocbio;
  else {
    throw FormatError("unknown algorithm section [algo." + name +
                      "] (expected mrbo, vrbo, or stocbio)");
  }
  SectionReader r(std::move(section), "algo." + name);
  const std::string mode = r.take_string("mode", "practical");
  if (mode == "practical") a.mode = AlgoMode::kPractical;
  else if (mode == "theorem") a.mode = AlgoMode::kTheorem;
  else {
    throw FormatError("algo." + name + ".mode must be practical or theorem");
  }
  a.K = r.take_int("K", a.K);
  a.budget_ms = r.take_int("budget_ms", a.budget_ms);
  a.eta = r.take_double("eta", a.eta);
  a.Q = static_cast<int>(r.take_int("Q", a.Q));
  a.S = r.take_size("S", a.S);
  a.S1 = r.take_size("S1", a.S1);
  a.S2 = r.take_size("S2", a.S2);
  a.gamma = r.take_double("gamma", a.gamma);
  a.lambda = r.take_double("lambda", a.lambda);
  a.c1 = r.take_double("c1", a.c1);
  a.c2 = r.take_double("c2", a.c2);
  a.m = r.take_double("m", a.m);
  a.d = r.take_double("d", a.d);
  a.reuse_prev_batch = r.take_bool("reuse_prev_batch", a.reuse_prev_batch);
  a.alpha = r.take_double("alpha", a.alpha);
  a.beta = r.take_double("beta", a.beta);
  a.period_q = r.take_int("q", a.period_q);
  a.m_inner = r.take_int("m_inner", a.m_inner);
  a.inner_plus_one = r.take_bool("inner_plus_one", a.inner_plus_one);
  a.alpha_out = r.take_double("alpha_out", a.alpha_out);
  a.beta_in = r.take_double("beta_in", a.beta_in);
  a.T_inner = r.take_int("T_inner", a.T_inner);
  a.theorem_lambda = r.take_optional_double("theorem_lambda");
  a.theorem_d = r.take_double("theorem_d", a.theorem_d);
  a.gamma_hint = r.take_double("gamma_hint", a.gamma_hint);
  a.warm_start = r.take_bool("warm_start", a.warm_start);
  a.empirical_constants = r.take_bool("empirical_constants", a.empirical_constants);
  a.x0 = r.take_init("x0");
  a.y0 = r.take_init("y0");
  r.finish();
  if (a.K <= 0 && a.budget_ms <= 0) {
    throw FormatError("algo." + name + ": need K > 0 or budget_ms > 0");
  }
  if (a.kind == AlgoKind::kStocbio && a.mode == AlgoMode::kTheorem) {
    throw FormatError("algo.stocbio: no theorem mode exists for the baseline");
  }
  return a;
}

ExperimentConfig parse_raw(RawConfig raw) {
  ExperimentConfig cfg;

  SectionReader pr(std::move(raw.problem), "problem");
  const std::string family = pr.take_string("family", "");
  if (family == "quadratic") {
    QuadraticProblemBlock b;
    b.p = pr.take_size("p", b.p);
    b.q = pr.take_size("q", b.q);
    b.mu = pr.take_double("mu", b.mu);
    b.L_inner = pr.take_double("L_inner", b.L_inner);
    b.noise_scale = pr.take_double("noise_scale", b.noise_scale);
    b.n_samples = pr.take_size("n_samples", b.n_samples);
    b.c_x = pr.take_double("c_x", b.c_x);
    b.coupling_norm = pr.take_double("coupling_norm", b.coupling_norm);
    b.target_norm = pr.take_double("target_norm", b.target_norm);
    b.seed = pr.take_u64("seed", b.seed);
    b.ball_radius = pr.take_double("ball_radius", b.ball_radius);
    cfg.problem = b;
  } else if (family == "hyperclean") {
    HypercleanProblemBlock b;
    b.n_train = pr.take_size("n_train", b.n_train);
    b.n_val = pr.take_size("n_val", b.n_val);
    b.n_test = pr.take_size("n_test", b.n_test);
    b.dim = pr.take_size("dim", b.dim);
    b.corrupt_rate = pr.take_double("corrupt_rate", b.corrupt_rate);
    b.ridge_c = pr.take_double("ridge_c", b.ridge_c);
    b.seed = pr.take_u64("seed", b.seed);
    b.ball_radius = pr.take_double("ball_radius", b.ball_radius);
    b.dataset_path = pr.take_string("dataset", b.dataset_path);
    cfg.problem = b;
  } else {
    throw FormatError("problem.family must be quadratic or hyperclean");
  }
  pr.finish();

  for (auto& [name, section] : raw.algos) {
    cfg.algos.push_back(parse_algo(name, std::move(section)));
  }
  if (cfg.algos.empty()) {
    throw FormatError("config needs at least one [algo.<name>] section");
  }

  SectionReader rr(std::move(raw.run), "run");
  cfg.run.seeds = rr.take_u64_list("seeds");
  cfg.run.out_dir = rr.take_string("out_dir", cfg.run.out_dir);
  cfg.run.diagnostics = rr.take_bool("diagnostics", cfg.run.diagnostics);
  cfg.run.trace_inner = rr.take_bool("trace_inner", cfg.run.trace_inner);
  cfg.run.parallel = static_cast<int>(rr.take_int("parallel", cfg.run.parallel));
  cfg.run.flush_every = rr.take_int("flush_every", cfg.run.flush_every);
  rr.finish();
  if (cfg.run.seeds.empty()) {
    throw FormatError("run.seeds must list at least one seed");
  }
  if (cfg.run.parallel < 1) throw FormatError("run.parallel must be >= 1");

  // Theorem mode needs known constants; empirical estimation must be opted
  // into for the hyper-cleaning family.
  for (const AlgoBlock& a : cfg.algos) {
    if (a.mode == AlgoMode::kTheorem && !cfg.is_quadratic() &&
        !a.empirical_constants) {
      throw FormatError("algo." + a.name +
                        ": theorem mode on hyperclean requires "
                        "empirical_constants = true");
    }
    if (a.x0.kind == InitSpec::Kind::kArgmin && !cfg.is_quadratic()) {
      throw FormatError("algo." + a.name + ": x0 = argmin needs the quadratic family");
    }
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  return parse_raw(tokenize(text));
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace bilevel
