#include "forwardctl/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

namespace forwardctl {

namespace {

using Json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) { return std::isfinite(v) ? format_double(v) : ""; }

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  return s == "-0.00" ? "0.00" : s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

// Runs job(i) for i in `order` on a fixed pool; results land in caller-owned
// slots so the output order never depends on scheduling.
void run_pool(const std::vector<std::size_t>& order, int threads,
              const std::function<void(std::size_t)>& job) {
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int n = std::max(1, std::min<int>(threads > 0 ? threads : hw, static_cast<int>(order.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < order.size(); k = next++) job(order[k]);
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::vector<Index> dims_with_input(const CascadeSystem& s) {
  std::vector<Index> d{s.input_dim()};
  for (Index n : s.state_dims()) d.push_back(n);
  return d;
}

Vec stack(const std::vector<Vec>& parts) {
  Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vec v(n);
  Index off = 0;
  for (const auto& p : parts) {
    v.segment(off, p.size()) = p;
    off += p.size();
  }
  return v;
}

Mat vstack_all(const std::vector<Mat>& parts) {
  Index r = 0;
  for (const auto& p : parts) r += p.rows();
  Mat m(r, parts.front().cols());
  Index off = 0;
  for (const auto& p : parts) {
    m.middleRows(off, p.rows()) = p;
    off += p.rows();
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------- configuration

std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::kCollect: return "collect";
    case RunMode::kDesign2: return "design2";
    case RunMode::kDesignN: return "designN";
    case RunMode::kSweepN: return "sweep-n";
    case RunMode::kNoiseSweep: return "noise-sweep";
    case RunMode::kVerify: return "verify";
  }
  return "?";
}

RunMode parse_mode(const std::string& s) {
  for (RunMode m : {RunMode::kCollect, RunMode::kDesign2, RunMode::kDesignN, RunMode::kSweepN,
                    RunMode::kNoiseSweep, RunMode::kVerify})
    if (mode_name(m) == s) return m;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

RunConfig parse_config(const std::string& text, const fs::path& base) {
  static const std::set<std::string> known = {
      "mode",  "system", "stages",     "t",          "seed",    "noise",   "alpha_grid",
      "n_max", "monolithic_n_max",     "steps",      "input",   "method",  "batches",
      "controller", "output_dir",      "threads"};
  RunConfig c;
  try {
    const Json j = Json::parse(text);
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [k, v] : j.items())
      if (!known.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("system")) {
      const Json& s = j["system"];
      if (s.contains("fixture")) c.fixture = s["fixture"].get<std::string>();
      if (s.contains("stage_files"))
        for (const auto& f : s["stage_files"]) c.stage_files.push_back(resolve(base, f.get<std::string>()));
    }
    if (j.contains("stages")) c.stages = j["stages"].get<Index>();
    if (j.contains("t")) c.t = j["t"].get<Index>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("noise")) {
      const Json& n = j["noise"];
      if (n.contains("measurement_bound")) c.measurement_bound = n["measurement_bound"].get<double>();
      if (n.contains("process_bound")) c.process_bound = n["process_bound"].get<double>();
      if (n.contains("caps")) c.noise_caps = n["caps"].get<std::vector<double>>();
    }
    if (j.contains("alpha_grid")) {
      const Json& a = j["alpha_grid"];
      if (a.is_array())
        c.alphas = a.get<std::vector<double>>();
      else
        c.alphas = alpha_grid(a.value("points", 25), a.value("lo", 1e-3), a.value("hi", 1e3));
    }
    if (j.contains("n_max")) c.n_max = j["n_max"].get<Index>();
    c.monolithic_n_max = j.contains("monolithic_n_max") ? j["monolithic_n_max"].get<Index>() : c.n_max;
    if (j.contains("steps")) c.steps = j["steps"].get<Index>();
    if (j.contains("input")) {
      c.input_distribution = j["input"].value("distribution", c.input_distribution);
      c.input_scale = j["input"].value("scale", c.input_scale);
    }
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("batches")) c.batches = resolve(base, j["batches"].get<std::string>());
    if (j.contains("controller")) c.controller = resolve(base, j["controller"].get<std::string>());
    if (j.contains("output_dir")) c.out_dir = resolve(base, j["output_dir"].get<std::string>());
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(read_text(path), base);
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (c.t < 1) fail("t must be ≥ 1");
  if (c.n_max < 2) fail("n_max must be ≥ 2");
  if (c.stages < 1) fail("stages must be ≥ 1");
  if (c.mode == RunMode::kDesign2 && c.stages != 2) fail("design2 needs stages = 2");
  if (c.steps < 1) fail("steps must be ≥ 1");
  if (!(c.measurement_bound >= 0.0) || !(c.process_bound >= 0.0)) fail("noise bounds must be ≥ 0");
  if (c.noise_caps.empty()) fail("noise caps must not be empty");
  for (double v : c.noise_caps)
    if (!(v > 0.0)) fail("noise caps must be positive");
  if (c.alphas.empty()) fail("alpha grid must not be empty");
  for (double a : c.alphas)
    if (!(a > 0.0)) fail("alpha grid values must be positive");
  if (!std::is_sorted(c.alphas.begin(), c.alphas.end())) fail("alpha grid must be ascending");
  if (c.input_distribution != "unit_normal") fail("input distribution must be unit_normal");
  if (!(c.input_scale > 0.0)) fail("input scale must be positive");
  if (c.method != "forwarding" && c.method != "monolithic") fail("method must be forwarding or monolithic");
  if (c.stage_files.empty() && c.fixture != "alternating" && c.fixture != "stage_a" && c.fixture != "stage_b")
    fail("unknown fixture '" + c.fixture + "'");
  for (const auto& f : c.stage_files)
    if (!fs::exists(f)) fail("stage file not found: " + f.string());
  if (!c.batches.empty() && !fs::is_directory(c.batches)) fail("batches directory not found: " + c.batches.string());
  if (!c.controller.empty() && !fs::exists(c.controller / "manifest.json"))
    fail("controller manifest not found in " + c.controller.string());
  if (c.threads < 0) fail("threads must be ≥ 0");
}

std::string config_json(const RunConfig& c) {
  Json j;
  j["mode"] = mode_name(c.mode);
  Json sys;
  if (c.stage_files.empty()) {
    sys["fixture"] = c.fixture;
  } else {
    Json files = Json::array();
    for (const auto& f : c.stage_files) files.push_back(f.generic_string());
    sys["stage_files"] = files;
  }
  j["system"] = sys;
  j["stages"] = c.stages;
  j["t"] = c.t;
  j["seed"] = c.seed;
  j["noise"] = Json{{"measurement_bound", c.measurement_bound},
                    {"process_bound", c.process_bound},
                    {"caps", c.noise_caps}};
  j["alpha_grid"] = c.alphas;
  j["n_max"] = c.n_max;
  j["monolithic_n_max"] = c.monolithic_n_max;
  j["steps"] = c.steps;
  j["input"] = Json{{"distribution", c.input_distribution}, {"scale", c.input_scale}};
  j["method"] = c.method;
  if (!c.batches.empty()) j["batches"] = c.batches.generic_string();
  if (!c.controller.empty()) j["controller"] = c.controller.generic_string();
  return j.dump(2) + "\n";
}

std::string run_id(const RunConfig& c) { return mode_name(c.mode) + "-s" + std::to_string(c.seed); }

RunPaths prepare_run(const RunConfig& c) {
  RunPaths p;
  p.root = c.out_dir / run_id(c);
  p.batches = p.root / "batches";
  p.controller = p.root / "controller";
  p.tables = p.root / "tables";
  p.plots = p.root / "plots";
  std::error_code ec;
  for (const auto& d : {p.batches, p.controller, p.tables, p.plots}) {
    fs::create_directories(d, ec);
    if (ec) throw IoError("cannot create " + d.string() + ": " + ec.message());
  }
  write_text(p.root / "config.json", config_json(c));
  return p;
}

CascadeSystem system_from_config(const RunConfig& c, Index stages) {
  if (stages < 1) throw std::invalid_argument("system_from_config: need at least one stage");
  if (!c.stage_files.empty()) {
    std::vector<LtiSystem> s;
    for (Index i = 0; i < stages; ++i)
      s.push_back(read_system_csv(c.stage_files[static_cast<std::size_t>(i) % c.stage_files.size()]));
    try {
      return CascadeSystem(std::move(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("system: ") + e.what());
    }
  }
  if (c.fixture == "alternating") return fixture_cascade(stages);
  return CascadeSystem(std::vector<LtiSystem>(static_cast<std::size_t>(stages), fixture_system(c.fixture)));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Experiment generate_experiment(const CascadeSystem& truth, Index t, std::uint64_t seed, double meas,
                               double proc, double input_scale) {
  Experiment e;
  e.truth = truth;
  e.u = input_scale * pe_input_gen(truth.input_dim(), t, seed);
  std::vector<Vec> x0s;
  for (Index i = 0; i < truth.size(); ++i)
    x0s.push_back(pe_input_gen(truth.stages[i].n(), 1, 100 * seed + static_cast<std::uint64_t>(i)).col(0));
  std::vector<NoiseSpec> noise;
  if (meas > 0.0 || proc > 0.0)
    for (Index i = 0; i < truth.size(); ++i)
      noise.push_back({meas, proc, derive_seed(seed, 1000 + static_cast<std::uint64_t>(i))});
  e.traj = simulate_cascade(truth, x0s, e.u, noise);
  for (Index i = 0; i < truth.size(); ++i) {
    NoisyBatch nb = i == 0 ? build_noisy_batch(e.traj[0], e.u, Mat::Zero(e.u.rows(), t), t)
                           : build_noisy_batch(e.traj[i], e.traj[i - 1].x.leftCols(t),
                                               e.traj[i - 1].dx.leftCols(t), t);
    e.batches.push_back(std::move(nb.batch));
    e.ledgers.push_back(std::move(nb.ledger));
  }
  return e;
}

// ---------------------------------------------------------------- noisy trials

StageChoice choose_stage_gain(const DataBatch& b, const Eigen::Ref<const Mat>& r,
                              const std::vector<double>& alphas, bool nominal_fallback, Index stage) {
  // SNR holds on an upper interval of the grid and robust feasibility on a
  // lower one, so two solves settle the choice: the smallest SNR-admissible α,
  // then the smallest α overall.
  const auto first = std::find_if(alphas.begin(), alphas.end(),
                                  [&](double a) { return snr_check(r, b.x_plus, a).holds; });
  if (first != alphas.end()) {
    try {
      return {design_gain_robust(b, *first), *first, true, true};
    } catch (const LmiInfeasible&) {
    }
  }
  if (first != alphas.begin()) {
    try {
      return {design_gain_robust(b, alphas.front()), alphas.front(), false, true};
    } catch (const LmiInfeasible&) {
    }
  }
  if (nominal_fallback) {
    try {
      return {design_gain(b), kNaN, false, false};
    } catch (const LmiInfeasible& e) {
      throw DesignFailure(DesignFailure::Kind::kLmi, stage, e.what());
    }
  }
  throw DesignFailure(DesignFailure::Kind::kLmi, stage, "robust LMI infeasible for every α in the grid");
}

double NoisyTrial::ratio() const {
  return bound && delta_norm2 > 0.0 ? bound->bound / delta_norm2 : kNaN;
}

NoisyTrial run_noisy_trial(const CascadeSystem& truth, const NoisyTrialOptions& opt) {
  if (truth.size() != 2) throw std::invalid_argument("run_noisy_trial: two stages expected");
  NoisyTrial tr;
  tr.exp = generate_experiment(truth, opt.t, opt.seed, opt.cap, opt.process_bound);
  const DataBatch& b1 = tr.exp.batches[0];
  const DataBatch& b2 = tr.exp.batches[1];
  const LtiSystem& s1 = truth.stages[0];
  const LtiSystem& s2 = truth.stages[1];
  tr.r1 = encapsulated_noise(s1, tr.exp.ledgers[0]);
  tr.r2 = encapsulated_noise(s2, tr.exp.ledgers[1]);
  const Index n1 = s1.n();
  bool have_upsilon = false;
  try {
    if (!rank_check(b1).ok) throw DesignFailure(DesignFailure::Kind::kRank, 1, "[X̄₁₋; U₁₋] rank deficient");
    tr.stage1 = choose_stage_gain(b1, tr.r1, opt.alphas, opt.nominal_fallback, 1);
    const Mat a1_bar = b1.x_plus * tr.stage1.gain.g_k;
    if (!rank_check_pair(b2.x_minus, b2.u_minus).ok)
      throw DesignFailure(DesignFailure::Kind::kRank, 2, "[X̄₂₋; X̄₁₋] rank deficient");
    try {
      tr.upsilon_hat = solve_empirical_noisy(b2, a1_bar, Mat::Identity(n1, n1));
    } catch (const SylvesterInfeasible& e) {
      throw DesignFailure(DesignFailure::Kind::kSylvester, 2, e.what());
    }
    have_upsilon = true;
    tr.zeta = zeta_batch(b1, b2, tr.stage1.gain.k, tr.upsilon_hat.theta);
    if (!rank_check(tr.zeta).ok) throw DesignFailure(DesignFailure::Kind::kRank, 2, "[Ẑ₋; V₋] rank deficient");
    tr.r_zeta = build_r_zeta(tr.r2, b2.x_minus, tr.upsilon_hat.g, tr.r1, tr.stage1.gain.g_k, b1.x_minus);
    tr.stage2 = choose_stage_gain(tr.zeta, tr.r_zeta, opt.alphas, opt.nominal_fallback, 2);
    tr.controller.input_dim = truth.input_dim();
    tr.controller.stage_dims = truth.state_dims();
    tr.controller.gains = {tr.stage1.gain.k, tr.stage2.gain.k};
    tr.controller.transforms = {tr.upsilon_hat.theta};
    tr.designed = true;
  } catch (const DesignFailure& e) {
    tr.failure = e.what();
  }

  // Oracle side.
  if (have_upsilon) {
    tr.a1_cl = s1.a + s1.b * tr.stage1.gain.k;
    try {
      tr.upsilon_true = solve_oracle({tr.a1_cl, s2.a, s2.b, Mat::Identity(n1, n1)});
      tr.delta_ups = tr.upsilon_true - tr.upsilon_hat.theta;
      tr.delta_norm2 = norm2(tr.delta_ups);
      const Mat& gn1 = tr.stage1.gain.g_k;
      const Mat& g = tr.upsilon_hat.g;
      tr.bound = error_bound_upsilon(tr.upsilon_hat, tr.r1, tr.r2, gn1, b2.x_minus, tr.a1_cl, s2.a);
      tr.residual = upsilon_error_residual(tr.delta_ups, tr.a1_cl, s2.a, tr.r2, b2.x_minus, g, tr.r1, gn1);
      const double dn = tr.delta_ups.norm();
      tr.residual_scale = 1.0 + s2.a.norm() * dn + dn * tr.a1_cl.norm() + tr.r2.norm() * g.norm() +
                          b2.x_minus.norm() * g.norm() * tr.r1.norm() * gn1.norm();
    } catch (const SpectrumOverlap& e) {
      if (tr.failure.empty()) tr.failure = e.what();
    }
  }
  if (tr.designed) tr.rho_true = spectral_radius(closed_loop_state_matrix(truth, tr.controller));
  return tr;
}

NoisyDesign design_2cascade_noisy_auto(const DataBatch& b1, const DataBatch& b2,
                                       const std::vector<double>& alphas) {
  const auto g1 = largest_feasible_alpha(b1, alphas);
  if (!g1) throw DesignFailure(DesignFailure::Kind::kLmi, 1, "robust LMI infeasible for every α in the grid");
  // Stage 2 data depend on N₁, so α₂ is searched after α₁ is fixed.
  const NoisyDesign probe = design_2cascade_noisy(b1, b2, g1->alpha, alphas.front());
  const auto g2 = largest_feasible_alpha(probe.zeta, alphas);
  return g2 ? design_2cascade_noisy(b1, b2, g1->alpha, g2->alpha) : probe;
}

// ---------------------------------------------------------------- sweep over N

namespace {

struct Attempt {
  bool ok = false;
  double rho = kNaN;
  std::string note;
};

Attempt attempt_design(const CascadeSystem& sys, bool monolithic, Index t, const RunConfig& cfg) {
  Attempt a;
  const Experiment e = generate_experiment(sys, t, cfg.seed, 0.0, 0.0, cfg.input_scale);
  try {
    Mat acl;
    if (monolithic) {
      const GainCertificate g = design_monolithic(e.batches);
      const LtiSystem m = monolithic_system(sys);
      acl = m.a + m.b * g.k;
    } else {
      const ForwardingDesign d = design_ncascade(e.batches);
      acl = closed_loop_state_matrix(sys, d.controller);
    }
    a.rho = spectral_radius(acl);
    a.ok = a.rho < 1.0;
    if (!a.ok) a.note = "closed loop not Schur (rho " + format_double(a.rho) + ")";
  } catch (const DesignFailure& ex) {
    a.note = ex.what();
  }
  return a;
}

}  // namespace

std::vector<SweepRow> sweep_n(const RunConfig& cfg) {
  struct Cell {
    Index n;
    bool monolithic;
  };
  std::vector<Cell> cells;
  for (Index n = 2; n <= cfg.n_max; ++n) {
    cells.push_back({n, false});
    cells.push_back({n, true});
  }
  std::vector<SweepRow> rows(cells.size());
  // Largest monolithic problems first to shorten the tail.
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto cost = [&](const Cell& c) { return c.monolithic ? 100 * c.n : c.n; };
    return cost(cells[a]) > cost(cells[b]);
  });
  run_pool(order, cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    SweepRow& r = rows[i];
    r.n = c.n;
    r.method = c.monolithic ? "monolithic" : "forwarding";
    const CascadeSystem sys = system_from_config(cfg, c.n);
    r.t_min_theory = tmin(c.monolithic ? TminMode::kMonolithic : TminMode::kForwarding, dims_with_input(sys));
    if (c.monolithic && c.n > cfg.monolithic_n_max) {
      r.note = "not attempted (monolithic_n_max)";
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (Index t = r.t_min_theory; t <= 2 * r.t_min_theory; ++t) {
      const Attempt a = attempt_design(sys, c.monolithic, t, cfg);
      r.t_used = t;
      r.rho_closed_loop = a.rho;
      r.note = a.note;
      if (a.ok) {
        r.succeeded = true;
        break;
      }
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "n,method,t_min_theory,t_used,succeeded,rho_closed_loop,note\n";
  for (const SweepRow& r : rows) {
    if (r.succeeded && !(r.rho_closed_loop < 1.0))
      throw std::logic_error("sweep row marked succeeded with rho ≥ 1");
    s += std::to_string(r.n) + "," + r.method + "," + std::to_string(r.t_min_theory) + "," +
         std::to_string(r.t_used) + "," + (r.succeeded ? "true" : "false") + "," + num(r.rho_closed_loop) +
         "," + csv_cell(r.note) + "\n";
  }
  return s;
}

std::string sweep_timing_json(const std::vector<SweepRow>& rows) {
  Json a = Json::array();
  for (const SweepRow& r : rows) a.push_back(Json{{"n", r.n}, {"method", r.method}, {"wall_ms", r.wall_ms}});
  return a.dump(2) + "\n";
}

// ---------------------------------------------------------------- noise sweep

namespace {

NoiseRow noise_row_forwarding(const RunConfig& cfg, double cap) {
  NoiseRow row;
  row.cap = cap;
  row.method = "forwarding";
  NoisyTrialOptions opt;
  opt.cap = cap;
  opt.t = cfg.t;
  opt.seed = cfg.seed;
  opt.process_bound = cfg.process_bound;
  opt.alphas = cfg.alphas;
  const NoisyTrial tr = run_noisy_trial(system_from_config(cfg, 2), opt);
  row.snr_holds = tr.designed && tr.snr_ok();
  row.feasible = tr.designed;
  row.alpha1 = tr.stage1.alpha;
  row.alpha2 = tr.stage2.alpha;
  row.rho_true = tr.rho_true;
  row.delta_ups_norm2 = tr.delta_norm2;
  if (tr.bound) row.bound = tr.bound->bound;
  row.ratio = tr.ratio();
  row.note = tr.failure;
  return row;
}

NoiseRow noise_row_monolithic(const RunConfig& cfg, double cap) {
  NoiseRow row;
  row.cap = cap;
  row.method = "monolithic";
  const CascadeSystem sys = system_from_config(cfg, 2);
  const Index t = std::max(cfg.t, tmin(TminMode::kMonolithic, dims_with_input(sys)));
  const Experiment e = generate_experiment(sys, t, cfg.seed, cap, cfg.process_bound);
  const LtiSystem mono = monolithic_system(sys);
  NoiseLedger l;
  std::vector<Mat> dxm, dxp, dm;
  for (const auto& li : e.ledgers) {
    dxm.push_back(li.dx_minus);
    dxp.push_back(li.dx_plus);
    dm.push_back(li.d_minus);
  }
  l.dx_minus = vstack_all(dxm);
  l.dx_plus = vstack_all(dxp);
  l.d_minus = vstack_all(dm);
  l.du_minus = e.ledgers.front().du_minus;
  const Mat r = encapsulated_noise(mono, l);
  const DataBatch b = monolithic_batch(e.batches);
  try {
    if (!rank_check(b).ok) throw DesignFailure(DesignFailure::Kind::kRank, 1, "[X̄₋; U₋] rank deficient");
    const StageChoice c = choose_stage_gain(b, r, cfg.alphas, false, 1);
    row.snr_holds = c.snr;
    row.feasible = true;
    row.alpha1 = c.alpha;
    row.rho_true = spectral_radius(mono.a + mono.b * c.gain.k);
  } catch (const DesignFailure& ex) {
    row.note = ex.what();
  }
  return row;
}

}  // namespace

std::vector<NoiseRow> noise_sweep(const RunConfig& cfg) {
  const std::size_t nc = cfg.noise_caps.size();
  std::vector<NoiseRow> rows(2 * nc);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  run_pool(order, cfg.threads, [&](std::size_t i) {
    const double cap = cfg.noise_caps[i / 2];
    rows[i] = i % 2 == 0 ? noise_row_forwarding(cfg, cap) : noise_row_monolithic(cfg, cap);
  });
  return rows;
}

std::string noise_csv(const std::vector<NoiseRow>& rows) {
  std::string s =
      "cap,method,snr_holds,feasible,alpha1,alpha2,rho_true,delta_ups_norm2,bound,bound_ratio,note\n";
  for (const NoiseRow& r : rows)
    s += format_double(r.cap) + "," + r.method + "," + (r.snr_holds ? "true" : "false") + "," +
         (r.feasible ? "true" : "false") + "," + num(r.alpha1) + "," + num(r.alpha2) + "," + num(r.rho_true) +
         "," + num(r.delta_ups_norm2) + "," + num(r.bound) + "," + num(r.ratio) + "," + csv_cell(r.note) + "\n";
  return s;
}

// ---------------------------------------------------------------- plots

namespace {

struct Axis {
  double lo, hi, step;
};

Axis nice_axis(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : 0.5 * std::abs(lo);
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string emit_plot(const PlotSpec& spec) {
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
  // Non-positive values have no place on a log axis.
  auto plottable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!spec.log_y || y > 0.0); };
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("emit_plot: x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!plottable(s.x[i], s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) throw std::invalid_argument("emit_plot: no plottable data points");
  const Axis ax = nice_axis(xmin, xmax);
  Axis ay = nice_axis(ymin, ymax);
  if (spec.log_y) ay = {std::floor(ymin), std::max(std::ceil(ymax), std::floor(ymin) + 1.0),
                        std::max(1.0, std::ceil((std::ceil(ymax) - std::floor(ymin)) / 8.0))};

  const double w = 640, h = 420, left = 70, right = 170, top = 40, bottom = 60;
  const double pw = w - left - right, ph = h - top - bottom;
  auto px = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - ay.lo) / (ay.hi - ay.lo) * ph; };
  auto py_raw = [&](double v) { return top + ph - (v - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  o += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  o += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">" + xml_escape(spec.title) + "</text>\n";
  o += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(pw) + "\" height=\"" +
       fixed(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (double v = ax.lo; v <= ax.hi + 1e-9 * ax.step; v += ax.step) {
    const std::string x = fixed(px(v));
    o += "<line x1=\"" + x + "\" y1=\"" + fixed(top + ph) + "\" x2=\"" + x + "\" y2=\"" + fixed(top + ph + 5) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + x + "\" y=\"" + fixed(top + ph + 18) + "\" text-anchor=\"middle\">" + tick_label(v) +
         "</text>\n";
  }
  for (double v = ay.lo; v <= ay.hi + 1e-9 * ay.step; v += ay.step) {
    const std::string y = fixed(py_raw(v));
    o += "<line x1=\"" + fixed(left - 5) + "\" y1=\"" + y + "\" x2=\"" + fixed(left) + "\" y2=\"" + y +
         "\" stroke=\"black\"/>\n";
    o += "<line x1=\"" + fixed(left) + "\" y1=\"" + y + "\" x2=\"" + fixed(left + pw) + "\" y2=\"" + y +
         "\" stroke=\"#dddddd\"/>\n";
    const std::string label = spec.log_y ? "1e" + tick_label(v) : tick_label(v);
    o += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(py_raw(v) + 4) + "\" text-anchor=\"end\">" + label +
         "</text>\n";
  }
  o += "</g>\n";
  o += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(h - 18) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xml_escape(spec.x_label) +
       "</text>\n";
  o += "<text x=\"18\" y=\"" + fixed(top + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"13\" transform=\"rotate(-90 18 " + fixed(top + ph / 2) + ")\">" + xml_escape(spec.y_label) +
       "</text>\n";

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const std::string colour = palette[k % (sizeof palette / sizeof *palette)];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (plottable(s.x[i], s.y[i])) pts.emplace_back(px(s.x[i]), py(s.y[i]));
    o += "<g class=\"series\" stroke=\"" + colour + "\" fill=\"" + colour + "\">\n";
    if (pts.size() > 1) {
      o += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i)
        o += (i ? " " : "") + fixed(pts[i].first) + "," + fixed(pts[i].second);
      o += "\"/>\n";
    }
    if (pts.size() <= 40)
      for (const auto& [x, y] : pts)
        o += "<circle cx=\"" + fixed(x) + "\" cy=\"" + fixed(y) + "\" r=\"3\"/>\n";
    o += "</g>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    o += "<line x1=\"" + fixed(left + pw + 12) + "\" y1=\"" + fixed(ly) + "\" x2=\"" + fixed(left + pw + 36) +
         "\" y2=\"" + fixed(ly) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fixed(left + pw + 42) + "\" y=\"" + fixed(ly + 4) +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(s.name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

// ---------------------------------------------------------------- commands

namespace {

fs::path stage_dir(const fs::path& root, Index i) { return root / ("stage_" + std::to_string(i + 1)); }

// Batches from a previous collect run, or a fresh experiment written into this
// run's batches/ directory.
std::vector<DataBatch> obtain_batches(const RunConfig& cfg, const RunPaths& p, Index stages,
                                      CommandResult& res) {
  std::vector<DataBatch> out;
  if (!cfg.batches.empty()) {
    for (Index i = 0; i < stages; ++i) {
      if (!fs::is_directory(stage_dir(cfg.batches, i)))
        throw IoError("missing " + stage_dir(cfg.batches, i).string());
      out.push_back(read_batch(stage_dir(cfg.batches, i)));
    }
    return out;
  }
  const Experiment e = generate_experiment(system_from_config(cfg, stages), cfg.t, cfg.seed,
                                           cfg.measurement_bound, cfg.process_bound, cfg.input_scale);
  for (Index i = 0; i < stages; ++i) {
    write_batch(stage_dir(p.batches, i), e.batches[i]);
    res.written.push_back(stage_dir(p.batches, i));
  }
  return e.batches;
}

void write_design(const RunPaths& p, const ForwardingDesign& d, const std::string& mode, CommandResult& res) {
  write_controller(p.controller, d.controller, mode, d.trace);
  for (const StageRecord& s : d.trace.stages) {
    const std::string stem = "stage_" + std::to_string(s.stage);
    if (s.gain) write_gain_certificate(p.controller / "certificates", stem + "_gain", *s.gain);
    if (s.sylvester) write_sylvester_certificate(p.controller / "certificates", stem + "_sylvester", *s.sylvester);
  }
  res.written.push_back(p.controller);
}

}  // namespace

CommandResult cmd_collect(const RunConfig& cfg) {
  CommandResult res;
  const RunPaths p = prepare_run(cfg);
  res.run_dir = p.root;
  const CascadeSystem sys = system_from_config(cfg, cfg.stages);
  const Experiment e =
      generate_experiment(sys, cfg.t, cfg.seed, cfg.measurement_bound, cfg.process_bound, cfg.input_scale);
  const bool noisy = cfg.measurement_bound > 0.0 || cfg.process_bound > 0.0;
  for (Index i = 0; i < sys.size(); ++i) {
    write_batch(stage_dir(p.batches, i), e.batches[i]);
    if (noisy) write_ledger(stage_dir(p.batches, i) / "ledger", e.ledgers[i]);
    res.written.push_back(stage_dir(p.batches, i));
  }
  res.summary = "collected " + std::to_string(sys.size()) + " stage batches with T = " + std::to_string(cfg.t);
  return res;
}

CommandResult cmd_design2(const RunConfig& cfg) {
  CommandResult res;
  const RunPaths p = prepare_run(cfg);
  res.run_dir = p.root;
  const auto b = obtain_batches(cfg, p, 2, res);
  const bool noisy = cfg.measurement_bound > 0.0 || cfg.process_bound > 0.0 ||
                     (!cfg.batches.empty() && has_ledger(stage_dir(cfg.batches, 0) / "ledger"));
  if (noisy) {
    const NoisyDesign nd = design_2cascade_noisy_auto(b[0], b[1], cfg.alphas);
    write_design(p, nd.design, "forwarding-robust", res);
    res.summary = "robust 2-cascade design, alpha1 = " + format_double(nd.gain1.alpha) +
                  ", alpha2 = " + format_double(nd.gain2.alpha);
  } else {
    write_design(p, design_2cascade(b[0], b[1]), "forwarding", res);
    res.summary = "2-cascade forwarding design";
  }
  return res;
}

CommandResult cmd_designN(const RunConfig& cfg) {
  CommandResult res;
  const RunPaths p = prepare_run(cfg);
  res.run_dir = p.root;
  const auto b = obtain_batches(cfg, p, cfg.stages, res);
  if (cfg.method == "monolithic") {
    const GainCertificate g = design_monolithic(b);
    write_gain_certificate(p.controller, "monolithic", g);
    Json m;
    m["design_mode"] = "monolithic";
    m["input_dim"] = b.front().m();
    std::vector<Index> dims;
    for (const auto& bi : b) dims.push_back(bi.n());
    m["stage_dims"] = dims;
    m["feedback"] = "monolithic_k.csv";
    write_text(p.controller / "manifest.json", m.dump(2) + "\n");
    res.written.push_back(p.controller);
    res.summary = "monolithic design for " + std::to_string(cfg.stages) + " stages";
  } else {
    write_design(p, design_ncascade(b), "forwarding", res);
    res.summary = "forwarding design for " + std::to_string(cfg.stages) + " stages";
  }
  return res;
}

CommandResult cmd_sweep_n(const RunConfig& cfg) {
  CommandResult res;
  const RunPaths p = prepare_run(cfg);
  res.run_dir = p.root;
  const auto rows = sweep_n(cfg);
  write_text(p.tables / "sweep_n.csv", sweep_csv(rows));
  write_text(p.tables / "sweep_timing.json", sweep_timing_json(rows));
  PlotSpec spec{"Data length required to stabilise an N-cascade", "number of subsystems N",
                "data length T", {{"forwarding", {}, {}}, {"monolithic", {}, {}}}, false};
  int ok_f = 0, ok_m = 0;
  for (const auto& r : rows) {
    if (!r.succeeded) continue;
    auto& s = spec.series[r.method == "forwarding" ? 0 : 1];
    s.x.push_back(static_cast<double>(r.n));
    s.y.push_back(static_cast<double>(r.t_used));
    (r.method == "forwarding" ? ok_f : ok_m)++;
  }
  if (ok_f + ok_m > 0) {
    write_text(p.plots / "sweep_n.svg", emit_plot(spec));
    res.written.push_back(p.plots / "sweep_n.svg");
  }
  res.written.push_back(p.tables / "sweep_n.csv");
  res.summary = "forwarding succeeded for " + std::to_string(ok_f) + " N, monolithic for " + std::to_string(ok_m);
  return res;
}

CommandResult cmd_noise_sweep(const RunConfig& cfg) {
  CommandResult res;
  const RunPaths p = prepare_run(cfg);
  res.run_dir = p.root;
  const auto rows = noise_sweep(cfg);
  write_text(p.tables / "noise_sweep.csv", noise_csv(rows));
  res.written.push_back(p.tables / "noise_sweep.csv");
  PlotSpec spec{"Transform error against its bound", "noise level i (cap 10^-i)", "2-norm",
                {{"|dUpsilon|", {}, {}}, {"bound", {}, {}}}, true};
  for (const auto& r : rows) {
    if (r.method != "forwarding" || !std::isfinite(r.delta_ups_norm2)) continue;
    const double level = -std::log10(r.cap);
    spec.series[0].x.push_back(level);
    spec.series[0].y.push_back(r.delta_ups_norm2);
    if (std::isfinite(r.bound)) {
      spec.series[1].x.push_back(level);
      spec.series[1].y.push_back(r.bound);
    }
  }
  if (!spec.series[0].x.empty()) {
    write_text(p.plots / "noise_sweep.svg", emit_plot(spec));
    res.written.push_back(p.plots / "noise_sweep.svg");
  }
  int stab = 0;
  for (const auto& r : rows) stab += r.feasible && r.rho_true < 1.0;
  res.summary = std::to_string(stab) + " of " + std::to_string(rows.size()) + " noisy designs stabilise";
  return res;
}

CommandResult cmd_verify(const RunConfig& cfg) {
  CommandResult res;
  const RunPaths p = prepare_run(cfg);
  res.run_dir = p.root;
  const bool noisy = cfg.measurement_bound > 0.0 || cfg.process_bound > 0.0;

  std::optional<ForwardingController> ctrl;
  Mat f;
  Index stages = cfg.stages;
  if (!cfg.controller.empty()) {
    Json m;
    try {
      m = Json::parse(read_text(cfg.controller / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(cfg.controller.string() + "/manifest.json: " + e.what());
    }
    if (m.value("design_mode", "") == "monolithic") {
      f = read_matrix_csv(cfg.controller / m.value("feedback", "monolithic_k.csv"), "k");
      stages = static_cast<Index>(m.at("stage_dims").size());
    } else {
      ctrl = read_controller(cfg.controller);
      stages = static_cast<Index>(ctrl->stage_dims.size());
    }
  }
  const CascadeSystem sys = system_from_config(cfg, stages);
  std::optional<Mat> delta_ups;
  if (!ctrl && f.size() == 0) {
    if (cfg.method == "monolithic") {
      const Experiment e = generate_experiment(sys, cfg.t, cfg.seed, cfg.measurement_bound, cfg.process_bound,
                                               cfg.input_scale);
      f = design_monolithic(e.batches).k;
    } else if (noisy && stages == 2) {
      const Experiment e = generate_experiment(sys, cfg.t, cfg.seed, cfg.measurement_bound, cfg.process_bound,
                                               cfg.input_scale);
      ctrl = design_2cascade_noisy_auto(e.batches[0], e.batches[1], cfg.alphas).design.controller;
    } else {
      const Experiment e = generate_experiment(sys, cfg.t, cfg.seed, cfg.measurement_bound, cfg.process_bound,
                                               cfg.input_scale);
      ctrl = design_ncascade(e.batches).controller;
    }
  }
  if (ctrl) {
    f = ctrl->feedback();
    if (stages == 2) {
      const Mat a1cl = sys.stages[0].a + sys.stages[0].b * ctrl->gains[0];
      try {
        delta_ups = solve_oracle({a1cl, sys.stages[1].a, sys.stages[1].b,
                                  Mat::Identity(sys.stages[0].n(), sys.stages[0].n())}) -
                    ctrl->transforms[0];
      } catch (const SpectrumOverlap&) {
      }
    }
  }
  const LtiSystem mono = monolithic_system(sys);
  const Mat acl = mono.a + mono.b * f;

  // Closed-loop run from seeded initial states.
  std::vector<Vec> x0;
  for (Index i = 0; i < stages; ++i)
    x0.push_back(pe_input_gen(sys.stages[i].n(), 1, derive_seed(cfg.seed, 2000 + i)).col(0));
  const NoiseSpec noise{cfg.measurement_bound, cfg.process_bound, derive_seed(cfg.seed, 3000)};
  Mat x;
  std::optional<NoisyClosedLoopRun> run2;
  if (ctrl && stages == 2) {
    run2 = simulate_noisy_closed_loop(sys, *ctrl, x0[0], x0[1], cfg.steps, noise);
    x = vstack_all({run2->x1, run2->x2});
  } else {
    std::mt19937_64 gen(noise.seed);
    const Index n = mono.n();
    x.resize(n, cfg.steps + 1);
    x.col(0) = stack(x0);
    auto draw = [&](double b) {
      Vec v = Vec::Zero(n);
      if (b > 0.0) {
        std::uniform_real_distribution<double> d(-b, b);
        for (Index i = 0; i < n; ++i) v(i) = d(gen);
      }
      return v;
    };
    for (Index k = 0; k < cfg.steps; ++k) {
      const Vec dx = draw(cfg.measurement_bound), d = draw(cfg.process_bound);
      x.col(k + 1) = mono.a * x.col(k) + mono.b * (f * (x.col(k) + dx)) + d;
    }
  }

  const auto dims = sys.state_dims();
  std::string csv = "k";
  for (Index i = 0; i < stages; ++i) csv += ",x" + std::to_string(i + 1) + "_norm";
  csv += ",x_norm\n";
  PlotSpec spec{"Closed-loop state norms", "time step k", "norm", {}, true};
  for (Index i = 0; i < stages; ++i) spec.series.push_back({"|x" + std::to_string(i + 1) + "|", {}, {}});
  for (Index k = 0; k <= cfg.steps; ++k) {
    csv += std::to_string(k);
    Index off = 0;
    for (Index i = 0; i < stages; ++i) {
      const double v = x.col(k).segment(off, dims[i]).norm();
      csv += "," + format_double(v);
      spec.series[i].x.push_back(static_cast<double>(k));
      spec.series[i].y.push_back(v);
      off += dims[i];
    }
    csv += "," + format_double(x.col(k).norm()) + "\n";
  }
  write_text(p.tables / "trajectory.csv", csv);
  write_text(p.plots / "trajectory.svg", emit_plot(spec));
  res.written.push_back(p.tables / "trajectory.csv");
  res.written.push_back(p.plots / "trajectory.svg");

  Json summary;
  summary["rho_closed_loop"] = spectral_radius(acl);
  summary["final_state_norm"] = x.col(cfg.steps).norm();
  res.summary = "closed-loop rho = " + format_double(spectral_radius(acl));
  if (run2 && noisy && delta_ups) {
    Json iss;
    try {
      const IssCertificate cert = iss_certificate(closed_loop_assemble(sys, *ctrl, delta_ups));
      iss["smallgain_holds"] = cert.holds;
      iss["smallgain_lhs"] = cert.smallgain_lhs;
      iss["c"] = cert.c;
      iss["p"] = cert.p;
      iss["gamma"] = cert.gamma_gain;
      const IssVerification v = iss_verify(*run2, sys, *ctrl, cert);
      iss["bound_holds"] = v.holds;
      iss["min_margin"] = v.min_slack;
      std::string t = "k,lhs,rhs,margin\n";
      for (std::size_t k = 0; k < v.lhs.size(); ++k)
        t += std::to_string(k) + "," + format_double(v.lhs[k]) + "," + format_double(v.rhs[k]) + "," +
             format_double(v.rhs[k] - v.lhs[k]) + "\n";
      write_text(p.tables / "iss.csv", t);
      res.written.push_back(p.tables / "iss.csv");
      res.summary += v.holds ? ", ISS bound holds" : ", ISS bound violated";
      if (!cert.holds) res.summary += " (small-gain condition not met: bound not certified)";
    } catch (const std::domain_error& e) {
      iss["error"] = e.what();
    }
    summary["iss"] = iss;
  }
  write_text(p.tables / "verify.json", summary.dump(2) + "\n");
  return res;
}

CommandResult run_command(const RunConfig& cfg) {
  switch (cfg.mode) {
    case RunMode::kCollect: return cmd_collect(cfg);
    case RunMode::kDesign2: return cmd_design2(cfg);
    case RunMode::kDesignN: return cmd_designN(cfg);
    case RunMode::kSweepN: return cmd_sweep_n(cfg);
    case RunMode::kNoiseSweep: return cmd_noise_sweep(cfg);
    case RunMode::kVerify: return cmd_verify(cfg);
  }
  throw std::logic_error("unhandled mode");
}

}  // namespace forwardctl
