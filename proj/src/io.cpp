#include "impulse/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace impulse {

namespace pt = boost::property_tree;

namespace {

class Section {
 public:
  Section(const pt::ptree& root, const std::string& name) : name_(name) {
    if (auto child = root.get_child_optional(pt::ptree::path_type(name, '/'))) node_ = &*child;
  }

  bool present() const { return node_ != nullptr; }

  std::optional<std::string> raw(const std::string& key) const {
    if (!node_) return std::nullopt;
    auto v = node_->get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v) return std::nullopt;
    return *v;
  }

  template <typename T>
  std::optional<T> get(const std::string& key) const {
    const auto text = raw(key);
    if (!text) return std::nullopt;
    std::istringstream in(*text);
    T value{};
    if constexpr (std::is_same_v<T, bool>) {
      std::string word;
      in >> word;
      if (word == "true" || word == "1" || word == "yes") return true;
      if (word == "false" || word == "0" || word == "no") return false;
      fail(key, *text);
    } else {
      in >> value;
      std::string rest;
      if (in.fail() || (in >> rest)) fail(key, *text);
    }
    return value;
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    return get<T>(key).value_or(fallback);
  }

  template <typename T>
  T require(const std::string& key) const {
    auto v = get<T>(key);
    if (!v) throw Error(ErrorCode::ConfigError, "missing [" + name_ + "] " + key);
    return *v;
  }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& text) const {
    throw Error(ErrorCode::ConfigError, "[" + name_ + "] " + key + " = '" + text + "' is not well-typed");
  }

  std::string name_;
  const pt::ptree* node_ = nullptr;
};

std::string interpolation_name(Interpolation mode) {
  return mode == Interpolation::LogLinear ? "loglinear" : "linear";
}

Interpolation parse_interpolation(const std::string& name) {
  if (name == "linear") return Interpolation::Linear;
  if (name == "loglinear") return Interpolation::LogLinear;
  throw Error(ErrorCode::ConfigError, "unknown interpolation '" + name + "'");
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  return out;
}

double parse_number(const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw Error(ErrorCode::ConfigError, "bad number '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

std::map<std::string, std::string> header_pairs(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream in(line.substr(1));
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex_hash(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string provenance_line(std::uint64_t spec_hash) {
  return std::string("# impulse-control ") + kToolVersion + " spec_hash=" + hex_hash(spec_hash);
}

ProblemConfig parse_config(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }

  ProblemConfig config;
  config.hash = fnv1a(text);
  auto& spec = config.spec;

  const Section regimes(root, "regimes");
  spec.regime_count = regimes.require<std::size_t>("count");
  if (spec.regime_count == 0) throw Error(ErrorCode::ConfigError, "[regimes] count must be >= 1");

  const Section dynamics(root, "dynamics");
  for (std::size_t i = 0; i < spec.regime_count; ++i) {
    const auto idx = std::to_string(i);
    spec.dynamics.drift.push_back({dynamics.require<double>("b." + idx), dynamics.get_or("b_slope." + idx, 0.0)});
    spec.dynamics.volatility.push_back(
        {dynamics.require<double>("sigma." + idx), dynamics.get_or("sigma_slope." + idx, 0.0)});
  }
  spec.dynamics.lipschitz_k = dynamics.get<double>("lipschitz_k");

  const Section profit(root, "profit");
  const auto profit_form = profit.require<std::string>("form");
  if (profit_form == "arctan") {
    spec.profit.form = ProfitSpec::Form::Arctan;
    spec.profit.offset = profit.get_or("offset", std::numbers::pi / 2.0);
  } else if (profit_form == "exp_scaled") {
    spec.profit.form = ProfitSpec::Form::ExpScaled;
    spec.profit.eta = profit.get_or("eta", 1.0);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown [profit] form '" + profit_form + "'");
  }

  const Section cost(root, "cost");
  const auto cost_form = cost.require<std::string>("form");
  if (cost_form == "inverse_quadratic") {
    spec.cost.form = CostSpec::Form::InverseQuadratic;
  } else if (cost_form == "exp_mu") {
    spec.cost.form = CostSpec::Form::ExpMu;
    spec.cost.mu = cost.require<double>("mu");
  } else if (cost_form == "constant") {
    spec.cost.form = CostSpec::Form::Constant;
    spec.cost.level = cost.require<double>("level");
  } else {
    throw Error(ErrorCode::ConfigError, "unknown [cost] form '" + cost_form + "'");
  }

  const Section kernel(root, "kernel");
  spec.kernel.intervention_enabled = kernel.get_or("intervention", true);
  spec.kernel.m_lo = kernel.get_or("m_lo", 0.0);
  spec.kernel.m_hi = kernel.get_or("m_hi", 0.0);
  spec.kernel.jump_std = kernel.get_or("jump_std", 1.0);
  const auto n = static_cast<Eigen::Index>(spec.regime_count);
  spec.kernel.switch_matrix = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = kernel.raw("row." + std::to_string(r));
    if (!row) {
      if (spec.kernel.intervention_enabled) {
        throw Error(ErrorCode::ConfigError, "missing [kernel] row." + std::to_string(r));
      }
      continue;
    }
    std::istringstream in(*row);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (!(in >> spec.kernel.switch_matrix(r, c))) {
        throw Error(ErrorCode::ConfigError, "[kernel] row." + std::to_string(r) + " needs " + std::to_string(n) +
                                                " entries");
      }
    }
  }

  spec.beta = Section(root, "discount").require<double>("beta");

  auto& run = config.run;
  const Section grid(root, "grid");
  run.grid.x_lo = grid.get_or("x_lo", run.grid.x_lo);
  run.grid.x_hi = grid.get_or("x_hi", run.grid.x_hi);
  run.grid.n_points = grid.get_or("n", run.grid.n_points);
  run.grid.dt = grid.get_or("dt", run.grid.dt);
  if (auto mode = grid.get<std::string>("interpolation")) run.solver.interpolation = parse_interpolation(*mode);

  const Section solve(root, "solve");
  run.solver.tol = solve.get_or("tol", run.solver.tol);
  run.solver.max_iter = solve.get_or("max_iter", run.solver.max_iter);
  run.solver.diffusion_nodes = solve.get_or("diffusion_nodes", run.solver.diffusion_nodes);
  run.solver.jump_nodes = solve.get_or("jump_nodes", run.solver.jump_nodes);
  const auto epsilon = solve.get<double>("epsilon");
  run.epsilon_given = epsilon.has_value();
  run.epsilon = epsilon.value_or(10.0 * run.solver.tol);

  const Section mc(root, "mc");
  run.mc.n_paths = mc.get_or<std::size_t>("n_paths", run.mc.n_paths);
  run.mc.horizon = mc.get_or("horizon", run.mc.horizon);
  run.mc.seed = mc.get_or<std::uint64_t>("seed", run.mc.seed);
  run.mc.dt = mc.get_or("dt", run.grid.dt);
  run.max_impulses = mc.get_or("n_max_impulses", run.max_impulses);
  run.start.x = mc.get_or("x0", 0.0);
  run.start.regime = mc.get_or<std::size_t>("regime0", 0);

  const Section strategy(root, "strategy");
  run.cadence.t0 = strategy.get_or("t0", 1.0);
  run.cadence.m = strategy.get_or("m", 0.5 * (spec.kernel.m_lo + spec.kernel.m_hi));
  require_valid(spec, Domain{run.grid.x_lo, run.grid.x_hi});
  return config;
}

ProblemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void write_value_fields(std::ostream& out, const ValueFields& fields, std::uint64_t spec_hash) {
  const auto& g = fields.grid;
  out << provenance_line(spec_hash) << '\n';
  out << "# grid x_lo=" << format_number(g.x_lo) << " x_hi=" << format_number(g.x_hi) << " n=" << g.n_points
      << " dt=" << format_number(g.dt) << " tol=" << format_number(fields.tol) << " iterations=" << fields.iterations
      << " residual=" << format_number(fields.residual) << " interpolation=" << interpolation_name(fields.interpolation)
      << '\n';
  out << "regime,x,rho_plus,m_star,rho,argmax_m,argmax_j\n";
  for (Eigen::Index i = 0; i < fields.regimes(); ++i) {
    for (Eigen::Index k = 0; k < g.n_points; ++k) {
      out << i << ',' << format_number(g.x(k)) << ',' << format_number(fields.rho_plus(k, i)) << ','
          << format_number(fields.m_star(k, i)) << ',' << format_number(fields.rho(k, i)) << ','
          << format_number(fields.argmax_m(k, i)) << ',' << fields.argmax_j(k, i) << '\n';
    }
  }
}

void write_value_fields(const std::filesystem::path& path, const ValueFields& fields, std::uint64_t spec_hash) {
  auto out = open_output(path);
  write_value_fields(out, fields, spec_hash);
}

LoadedFields read_value_fields(std::istream& in) {
  LoadedFields loaded;
  auto& f = loaded.fields;
  std::string line;
  bool have_grid = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto kv = header_pairs(line);
      if (auto it = kv.find("spec_hash"); it != kv.end()) loaded.spec_hash = std::stoull(it->second, nullptr, 16);
      if (kv.count("x_lo")) {
        try {
          f.grid.x_lo = parse_number(kv.at("x_lo"));
          f.grid.x_hi = parse_number(kv.at("x_hi"));
          f.grid.n_points = std::stoi(kv.at("n"));
          f.grid.dt = parse_number(kv.at("dt"));
          f.tol = parse_number(kv.at("tol"));
          f.iterations = std::stoi(kv.at("iterations"));
          f.residual = parse_number(kv.at("residual"));
          f.interpolation = parse_interpolation(kv.at("interpolation"));
        } catch (const std::out_of_range&) {
          throw Error(ErrorCode::ConfigError, "incomplete grid header in value fields");
        }
        have_grid = true;
      }
      continue;
    }
    if (line.rfind("regime,", 0) == 0) continue;
    rows.push_back(split(line, ','));
  }
  if (!have_grid) throw Error(ErrorCode::ConfigError, "value fields lack the grid header");
  f.grid.check();
  const auto n = static_cast<Eigen::Index>(f.grid.n_points);
  if (rows.empty() || rows.size() % static_cast<std::size_t>(n) != 0) {
    throw Error(ErrorCode::ConfigError, "value fields row count is not a multiple of n");
  }
  const auto regimes = static_cast<Eigen::Index>(rows.size()) / n;
  f.rho_plus.resize(n, regimes);
  f.m_star.resize(n, regimes);
  f.rho.resize(n, regimes);
  f.argmax_m.resize(n, regimes);
  f.argmax_j.resize(n, regimes);
  for (const auto& cells : rows) {
    if (cells.size() != 7) throw Error(ErrorCode::ConfigError, "value fields row needs 7 columns");
    const auto i = static_cast<Eigen::Index>(std::stol(cells[0]));
    const double x = parse_number(cells[1]);
    const auto k = f.grid.nearest(x);
    if (i < 0 || i >= regimes) throw Error(ErrorCode::ConfigError, "regime index out of range");
    f.rho_plus(k, i) = parse_number(cells[2]);
    f.m_star(k, i) = parse_number(cells[3]);
    f.rho(k, i) = parse_number(cells[4]);
    f.argmax_m(k, i) = parse_number(cells[5]);
    f.argmax_j(k, i) = std::stoi(cells[6]);
  }
  return loaded;
}

LoadedFields read_value_fields(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open value fields " + path.string());
  return read_value_fields(in);
}

void write_regions(const std::filesystem::path& path, const Region& region, std::uint64_t spec_hash) {
  auto out = open_output(path);
  out << provenance_line(spec_hash) << '\n';
  out << "# regions epsilon=" << format_number(region.epsilon) << '\n';
  out << "regime,interval_lo,interval_hi,label\n";
  for (std::size_t i = 0; i < region.impulse.size(); ++i) {
    // Interleave I and C runs in increasing x.
    std::vector<std::pair<Interval, char>> runs;
    for (const auto& iv : region.impulse[i]) runs.push_back({iv, 'I'});
    for (const auto& iv : region.continuation[i]) runs.push_back({iv, 'C'});
    std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.first.lo < b.first.lo; });
    for (const auto& [iv, label] : runs) {
      out << i << ',' << format_number(iv.lo) << ',' << format_number(iv.hi) << ',' << label << '\n';
    }
  }
}

void write_traces(const std::filesystem::path& path, const std::vector<TraceRow>& rows, std::uint64_t spec_hash) {
  auto out = open_output(path);
  out << provenance_line(spec_hash) << '\n';
  out << "episode_id,n,tau_n,from_regime,from_x,to_regime,to_x,discounted_cost\n";
  for (const auto& row : rows) {
    for (std::size_t n = 0; n < row.trace.impulses.size(); ++n) {
      const auto& imp = row.trace.impulses[n];
      out << row.episode << ',' << n << ',' << format_number(imp.tau) << ',' << imp.from.regime << ','
          << format_number(imp.from.x) << ',' << imp.to.regime << ',' << format_number(imp.to.x) << ','
          << format_number(imp.discounted_cost) << '\n';
    }
  }
}

void write_episode_summary(const std::filesystem::path& path, const std::vector<EpisodeSummary>& episodes,
                           std::uint64_t spec_hash) {
  auto out = open_output(path);
  out << provenance_line(spec_hash) << '\n';
  out << "episode_id,gain,n_impulses,stopped_reason\n";
  for (std::size_t p = 0; p < episodes.size(); ++p) {
    out << p << ',' << format_number(episodes[p].gain) << ',' << episodes[p].n_impulses << ','
        << to_string(episodes[p].stopped_reason) << '\n';
  }
}

void write_gain_estimate(const std::filesystem::path& path, const std::string& strategy_name,
                         const GainEstimate& estimate, std::uint64_t spec_hash) {
  auto out = open_output(path);
  out << provenance_line(spec_hash) << '\n';
  out << "strategy,mean,stderr,n_paths,horizon,dt,tail_bound\n";
  out << strategy_name << ',' << format_number(estimate.mean) << ',' << format_number(estimate.std_error) << ','
      << estimate.n_paths << ',' << format_number(estimate.horizon) << ',' << format_number(estimate.dt) << ','
      << format_number(estimate.tail_bound) << '\n';
  out << "# impulse_count_histogram\n";
  out << "n_impulses,count\n";
  for (std::size_t n = 0; n < estimate.impulse_histogram.size(); ++n) {
    out << n << ',' << estimate.impulse_histogram[n] << '\n';
  }
}

void write_path_dump(const std::filesystem::path& path, const std::vector<TraceRow>& rows, std::uint64_t spec_hash) {
  auto out = open_output(path);
  out << provenance_line(spec_hash) << '\n';
  out << "path_id,t,regime,y,discounted_profit_so_far\n";
  for (const auto& row : rows) {
    const auto& tr = row.trace;
    for (std::size_t k = 0; k < tr.path_times.size(); ++k) {
      out << row.episode << ',' << format_number(tr.path_times[k]) << ',' << tr.path_regimes[k] << ','
          << format_number(tr.path_values[k]) << ',' << format_number(tr.path_profit[k]) << '\n';
    }
  }
}

void write_audit_states(const std::filesystem::path& path, const AuditReport& report, std::uint64_t spec_hash) {
  auto out = open_output(path);
  out << provenance_line(spec_hash) << '\n';
  out << "regime,x,rho,rho_plus,kernel_violation,rstar_gap,stopping_violation,stopping_stderr,tstar_gap,tstar_stderr\n";
  for (const auto& s : report.states) {
    out << s.regime << ',' << format_number(s.x) << ',' << format_number(s.rho) << ',' << format_number(s.rho_plus)
        << ',' << format_number(s.kernel_violation) << ',' << format_number(s.rstar_gap) << ','
        << format_number(s.stopping_violation) << ',' << format_number(s.stopping_stderr) << ','
        << format_number(s.tstar_gap) << ',' << format_number(s.tstar_stderr) << '\n';
  }
}

}  // namespace impulse
