#include <gtest/gtest.h>

#include "forwardctl/bench.hpp"

using namespace forwardctl;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const RunConfig c = parse_config(R"({"mode": "noise-sweep", "t": 12, "seed": 9,
      "noise": {"measurement_bound": 1e-3, "caps": [1e-2, 1e-3]},
      "alpha_grid": {"points": 3, "lo": 0.1, "hi": 10}, "n_max": 4})",
                                   "/base");
  EXPECT_EQ(c.mode, RunMode::kNoiseSweep);
  EXPECT_EQ(c.t, 12);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.noise_caps.size(), 2u);
  ASSERT_EQ(c.alphas.size(), 3u);
  EXPECT_NEAR(c.alphas[1], 1.0, 1e-14);
  EXPECT_EQ(c.monolithic_n_max, 4);  // follows n_max unless given
  EXPECT_EQ(run_id(c), "noise-sweep-s9");
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const fs::path base = fs::temp_directory_path() / "forwardctl_cfg_paths";
  fs::create_directories(base / "rel_batches");
  fs::create_directories(base / "abs_batches");
  RunConfig c = parse_config(R"({"output_dir": "runs", "batches": "rel_batches"})", base);
  EXPECT_EQ(c.out_dir, base / "runs");
  EXPECT_EQ(c.batches, base / "rel_batches");
  c = parse_config(R"({"batches": ")" + (base / "abs_batches").string() + R"("})", "/elsewhere");
  EXPECT_EQ(c.batches, base / "abs_batches");
  EXPECT_THROW(parse_config(R"({"batches": "nope"})", base), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndBadJson) {
  EXPECT_THROW(parse_config(R"({"tt": 3})", "."), ConfigError);
  EXPECT_THROW(parse_config("{", "."), ConfigError);
  EXPECT_THROW(parse_config(R"({"t": "eight"})", "."), ConfigError);
  EXPECT_THROW(parse_config(R"({"mode": "dance"})", "."), ConfigError);
}

TEST(Config, ValidateEnforcesInvariants) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c));
  c.t = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.n_max = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.stage_files = {"/definitely/not/here.csv"};
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.method = "other";
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.seed = 17;
  c.t = 10;
  c.measurement_bound = 1e-4;
  const RunConfig back = parse_config(config_json(c), ".");
  EXPECT_EQ(config_json(back), config_json(c));
}

TEST(Bench, DerivedSeedsDiffer) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Plot, DeterministicSvg) {
  PlotSpec s{"title", "N", "T", {{"a", {1, 2, 3}, {8, 8, 8}}, {"b", {1, 2, 3}, {12, 16, 20}}}, false};
  const std::string a = emit_plot(s), b = emit_plot(s);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(a, "<polyline"), 2u);
  EXPECT_NE(a.find(">N<"), std::string::npos);
  EXPECT_NE(a.find(">T<"), std::string::npos);
}

TEST(Plot, SinglePointGivesOneMarker) {
  PlotSpec s{"one", "x", "y", {{"only", {1.0}, {2.0}}}, false};
  const std::string svg = emit_plot(s);
  EXPECT_EQ(count(svg, "<polyline"), 0u);
  EXPECT_EQ(count(svg, "<circle"), 1u);
  EXPECT_NE(svg.find(">only<"), std::string::npos);
}

TEST(Plot, EmptyTableIsRejected) {
  EXPECT_THROW(emit_plot(PlotSpec{"t", "x", "y", {}, false}), std::invalid_argument);
  EXPECT_THROW(emit_plot(PlotSpec{"t", "x", "y", {{"s", {1.0}, {-1.0}}}, true}), std::invalid_argument);
  EXPECT_THROW(emit_plot(PlotSpec{"t", "x", "y", {{"s", {1.0, 2.0}, {1.0}}}, false}), std::invalid_argument);
}

TEST(Sweep, CsvEnforcesSuccessInvariant) {
  SweepRow ok{2, "forwarding", 8, 8, true, 0.5, 1.0, ""};
  EXPECT_NO_THROW(sweep_csv({ok}));
  SweepRow bad = ok;
  bad.rho_closed_loop = 1.0;
  EXPECT_THROW(sweep_csv({bad}), std::logic_error);
  const std::string csv = sweep_csv({ok});
  EXPECT_EQ(csv.find("wall"), std::string::npos);
}

TEST(Sweep, SmallSweepRows) {
  RunConfig c;
  c.n_max = 3;
  c.monolithic_n_max = 2;
  const auto rows = sweep_n(c);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].method, "forwarding");
  EXPECT_TRUE(rows[0].succeeded);
  EXPECT_EQ(rows[0].t_used, 8);
  EXPECT_EQ(rows[1].method, "monolithic");
  EXPECT_EQ(rows[1].t_min_theory, 12);
  EXPECT_FALSE(rows[3].succeeded);  // beyond monolithic_n_max
  EXPECT_NE(rows[3].note.find("not attempted"), std::string::npos);
}

TEST(Noisy, TrialBoundDominatesError) {
  NoisyTrialOptions o;
  o.cap = 1e-3;
  o.t = 12;
  o.seed = 3;
  o.nominal_fallback = true;
  const NoisyTrial tr = run_noisy_trial(fixture_cascade(2), o);
  ASSERT_TRUE(tr.bound.has_value()) << tr.failure;
  EXPECT_GE(tr.bound->bound, tr.delta_norm2);
  EXPECT_LE(tr.residual, 1e-8 * tr.residual_scale);
  EXPECT_GE(tr.ratio(), 1.0);
}

TEST(Noisy, ExperimentIsSeedDeterministic) {
  const Experiment a = generate_experiment(fixture_cascade(2), 10, 5, 1e-3);
  const Experiment b = generate_experiment(fixture_cascade(2), 10, 5, 1e-3);
  EXPECT_EQ(a.batches[1].x_plus, b.batches[1].x_plus);
  EXPECT_LE(a.ledgers[0].dx_minus.cwiseAbs().maxCoeff(), 1e-3);
  // Stage 2's input block carries stage 1's measurement noise.
  EXPECT_EQ(a.ledgers[1].du_minus, a.ledgers[0].dx_minus);
}
