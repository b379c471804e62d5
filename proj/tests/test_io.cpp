#include <cstdlib>
#include <limits>

#include <gtest/gtest.h>

#include "forwardctl/cascade.hpp"
#include "forwardctl/io.hpp"

using namespace forwardctl;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("forwardctl_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Io, MatrixCsvRoundTripIsExact) {
  Mat m(2, 3);
  m << 0.1, -1e-300, 1.0 / 3.0, std::numeric_limits<double>::max(), 0.0, -2.5e17;
  const fs::path p = scratch("rt") / "m.csv";
  write_matrix_csv(p, "x_minus", m);
  const Mat back = read_matrix_csv(p, "x_minus");
  EXPECT_EQ(back, m);  // bitwise: shortest round-trip formatting
}

TEST(Io, EmptyMatrixRoundTrip) {
  const fs::path p = scratch("empty") / "m.csv";
  write_matrix_csv(p, "gain", Mat(0, 3));
  const Mat back = read_matrix_csv(p);
  EXPECT_EQ(back.rows(), 0);
  EXPECT_EQ(back.cols(), 3);
}

TEST(Io, MalformedCsvIsRejected) {
  const fs::path d = scratch("bad");
  const auto expect_bad = [&](const std::string& text, const std::string& kind = "") {
    write_text(d / "m.csv", text);
    EXPECT_THROW(read_matrix_csv(d / "m.csv", kind), IoError) << text;
  };
  expect_bad("rows,cols\n");
  expect_bad("kind,rows,cols\nm,2,2\n1,2\n");
  expect_bad("kind,rows,cols\nm,1,2\n1,x\n");
  expect_bad("kind,rows,cols\nm,1,2\n1,2,3\n");
  expect_bad("kind,rows,cols\nm,1,2\n1,2\n3,4\n");
  expect_bad("kind,rows,cols\nm,1,1\n1\n", "gain");
  expect_bad("kind,rows,cols\nm,-1,1\n");
  EXPECT_THROW(read_matrix_csv(d / "missing.csv"), IoError);
}

TEST(Io, CrlfLinesAreAccepted) {
  const fs::path d = scratch("crlf");
  write_text(d / "m.csv", "kind,rows,cols\r\nm,1,2\r\n1.5,2\r\n");
  const Mat m = read_matrix_csv(d / "m.csv", "m");
  EXPECT_EQ(m(0, 0), 1.5);
  EXPECT_EQ(m(0, 1), 2.0);
}

TEST(Io, BatchAndLedgerRoundTrip) {
  const fs::path d = scratch("batch");
  const Mat u = pe_input_gen(1, 6, 1);
  Mat a(2, 2), b(2, 1);
  a << 0.9, 0.1, 0.0, 1.1;
  b << 0.0, 1.0;
  const Trajectory tr = simulate({a, b}, Vec::Ones(2), u, NoiseSpec{1e-3, 1e-4, 3});
  const NoisyBatch nb = build_noisy_batch(tr, u, Mat::Zero(1, 6), 6);
  write_batch(d, nb.batch);
  write_ledger(d / "ledger", nb.ledger);
  const DataBatch back = read_batch(d);
  EXPECT_EQ(back.x_minus, nb.batch.x_minus);
  EXPECT_EQ(back.x_plus, nb.batch.x_plus);
  EXPECT_EQ(back.u_minus, nb.batch.u_minus);
  ASSERT_TRUE(has_ledger(d / "ledger"));
  EXPECT_EQ(read_ledger(d / "ledger").d_minus, nb.ledger.d_minus);
  EXPECT_FALSE(has_ledger(d));
}

TEST(Io, NonConformingBatchIsRejected) {
  const fs::path d = scratch("nonconf");
  write_matrix_csv(d / "x_minus.csv", "x_minus", Mat::Ones(2, 3));
  write_matrix_csv(d / "x_plus.csv", "x_plus", Mat::Ones(2, 4));
  write_matrix_csv(d / "u_minus.csv", "u_minus", Mat::Ones(1, 3));
  EXPECT_THROW(read_batch(d), IoError);
}

TEST(Io, ControllerRoundTrip) {
  ForwardingController c;
  c.input_dim = 1;
  c.stage_dims = {2, 1};
  c.gains = {Mat::Random(1, 2), Mat::Random(1, 1)};
  c.transforms = {Mat::Random(1, 2)};
  const fs::path d = scratch("ctrl");
  write_controller(d, c, "forwarding", DesignTrace{});
  const ForwardingController back = read_controller(d);
  EXPECT_EQ(back.stage_dims, c.stage_dims);
  ASSERT_EQ(back.gains.size(), 2u);
  EXPECT_EQ(back.gains[1], c.gains[1]);
  EXPECT_EQ(back.transforms[0], c.transforms[0]);
  EXPECT_NE(read_text(d / "manifest.json").find("\"design_mode\": \"forwarding\""), std::string::npos);
}

TEST(Io, InconsistentManifestIsRejected) {
  const fs::path d = scratch("badmanifest");
  write_matrix_csv(d / "gain_1.csv", "gain", Mat::Ones(1, 2));
  write_text(d / "manifest.json",
             R"({"input_dim": 1, "stage_dims": [2, 1], "gains": ["gain_1.csv"], "transforms": []})");
  EXPECT_THROW(read_controller(d), IoError);
  write_text(d / "manifest.json", "{not json");
  EXPECT_THROW(read_controller(d), IoError);
}

TEST(Io, SystemCsvNeedsInputColumns) {
  const fs::path d = scratch("sys");
  write_matrix_csv(d / "s.csv", "ab", Mat::Identity(2, 2));
  EXPECT_THROW(read_system_csv(d / "s.csv"), IoError);
}
