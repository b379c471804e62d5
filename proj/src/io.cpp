#include "forwardctl/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace forwardctl {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kHeader = "kind,rows,cols";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_double(const std::string& s, const fs::path& path) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw IoError(path.string() + ": bad number '" + s + "'");
  return v;
}

Index parse_index(const std::string& s, const fs::path& path) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0)
    throw IoError(path.string() + ": bad dimension '" + s + "'");
  return static_cast<Index>(v);
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json sylvester_summary(const SylvesterCertificate& c) {
  return Json{{"residual_dyn", c.residual_dyn},
              {"residual_out", c.residual_out},
              {"g_fro", c.g_fro},
              {"theta_fro", c.theta.norm()}};
}

Json gain_summary(const GainCertificate& c) {
  return Json{{"margin", c.margin},
              {"inverted_conditioning", c.inverted_conditioning},
              {"decay", c.decay},
              {"alpha", c.alpha},
              {"k_norm2", norm2(c.k)}};
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw IoError("format_double: conversion failed");
  return std::string(buf, p);
}

std::string matrix_csv(const std::string& kind, const Eigen::Ref<const Mat>& m) {
  if (kind.empty() || kind.find_first_of(",\n") != std::string::npos)
    throw IoError("matrix_csv: invalid kind '" + kind + "'");
  std::string s = std::string(kHeader) + "\n" + kind + "," + std::to_string(m.rows()) + "," +
                  std::to_string(m.cols()) + "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) s += ',';
      s += format_double(m(i, j));
    }
    s += '\n';
  }
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix_csv(const fs::path& path, const std::string& kind, const Eigen::Ref<const Mat>& m) {
  write_text(path, matrix_csv(kind, m));
}

Mat read_matrix_csv(const fs::path& path, const std::string& kind) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kHeader)
    throw IoError(path.string() + ": missing '" + kHeader + "' header");
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing dimension row");
  const auto dims = split(strip_cr(line));
  if (dims.size() != 3) throw IoError(path.string() + ": malformed dimension row");
  if (!kind.empty() && dims[0] != kind)
    throw IoError(path.string() + ": expected kind '" + kind + "', found '" + dims[0] + "'");
  const Index rows = parse_index(dims[1], path), cols = parse_index(dims[2], path);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": too few rows");
    const auto cells = split(strip_cr(line));
    if (static_cast<Index>(cells.size()) != cols)
      throw IoError(path.string() + ": row " + std::to_string(i + 1) + " has " +
                    std::to_string(cells.size()) + " values, expected " + std::to_string(cols));
    for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(cells[j], path);
  }
  while (std::getline(in, line))
    if (!strip_cr(line).empty()) throw IoError(path.string() + ": trailing data");
  return m;
}

void write_batch(const fs::path& dir, const DataBatch& b) {
  write_matrix_csv(dir / "x_minus.csv", "x_minus", b.x_minus);
  write_matrix_csv(dir / "x_plus.csv", "x_plus", b.x_plus);
  write_matrix_csv(dir / "u_minus.csv", "u_minus", b.u_minus);
}

DataBatch read_batch(const fs::path& dir) {
  DataBatch b;
  b.x_minus = read_matrix_csv(dir / "x_minus.csv", "x_minus");
  b.x_plus = read_matrix_csv(dir / "x_plus.csv", "x_plus");
  b.u_minus = read_matrix_csv(dir / "u_minus.csv", "u_minus");
  if (b.x_plus.rows() != b.n() || b.x_plus.cols() != b.t() || b.u_minus.cols() != b.t())
    throw IoError(dir.string() + ": batch blocks do not conform");
  return b;
}

void write_ledger(const fs::path& dir, const NoiseLedger& l) {
  write_matrix_csv(dir / "dx_minus.csv", "dx_minus", l.dx_minus);
  write_matrix_csv(dir / "dx_plus.csv", "dx_plus", l.dx_plus);
  write_matrix_csv(dir / "du_minus.csv", "du_minus", l.du_minus);
  write_matrix_csv(dir / "d_minus.csv", "d_minus", l.d_minus);
}

NoiseLedger read_ledger(const fs::path& dir) {
  NoiseLedger l;
  l.dx_minus = read_matrix_csv(dir / "dx_minus.csv", "dx_minus");
  l.dx_plus = read_matrix_csv(dir / "dx_plus.csv", "dx_plus");
  l.du_minus = read_matrix_csv(dir / "du_minus.csv", "du_minus");
  l.d_minus = read_matrix_csv(dir / "d_minus.csv", "d_minus");
  return l;
}

bool has_ledger(const fs::path& dir) { return fs::exists(dir / "dx_minus.csv"); }

void write_sylvester_certificate(const fs::path& dir, const std::string& stem,
                                 const SylvesterCertificate& c) {
  write_matrix_csv(dir / (stem + "_g.csv"), "g", c.g);
  write_matrix_csv(dir / (stem + "_theta.csv"), "theta", c.theta);
  write_json(dir / (stem + ".json"), sylvester_summary(c));
}

void write_gain_certificate(const fs::path& dir, const std::string& stem, const GainCertificate& c) {
  write_matrix_csv(dir / (stem + "_k.csv"), "k", c.k);
  write_matrix_csv(dir / (stem + "_q.csv"), "q", c.q);
  write_matrix_csv(dir / (stem + "_g_k.csv"), "g_k", c.g_k);
  write_json(dir / (stem + ".json"), gain_summary(c));
}

void write_controller(const fs::path& dir, const ForwardingController& c, const std::string& mode,
                      const DesignTrace& trace) {
  Json m;
  m["design_mode"] = mode;
  m["input_dim"] = c.input_dim;
  m["stage_dims"] = c.stage_dims;
  Json gains = Json::array(), transforms = Json::array();
  for (std::size_t i = 0; i < c.gains.size(); ++i) {
    const std::string f = "gain_" + std::to_string(i + 1) + ".csv";
    write_matrix_csv(dir / f, "gain", c.gains[i]);
    gains.push_back(f);
  }
  for (std::size_t i = 0; i < c.transforms.size(); ++i) {
    const std::string f = "transform_" + std::to_string(i + 1) + ".csv";
    write_matrix_csv(dir / f, "transform", c.transforms[i]);
    transforms.push_back(f);
  }
  m["gains"] = gains;
  m["transforms"] = transforms;
  Json stages = Json::array();
  for (const StageRecord& s : trace.stages) {
    Json j{{"stage", s.stage}};
    if (s.gain) j["gain"] = gain_summary(*s.gain);
    if (s.sylvester) j["sylvester"] = sylvester_summary(*s.sylvester);
    Json ranks = Json::array();
    for (const RankReport& r : s.ranks) ranks.push_back(Json{{"rank", r.rank}, {"required", r.required}});
    j["ranks"] = ranks;
    j["z_minus_fro"] = s.z_minus_norm;
    j["z_plus_fro"] = s.z_plus_norm;
    j["v_minus_fro"] = s.v_minus_norm;
    stages.push_back(j);
  }
  m["trace"] = stages;
  write_json(dir / "manifest.json", m);
}

ForwardingController read_controller(const fs::path& dir) {
  Json m;
  try {
    m = Json::parse(read_text(dir / "manifest.json"));
    ForwardingController c;
    c.input_dim = m.at("input_dim").get<Index>();
    c.stage_dims = m.at("stage_dims").get<std::vector<Index>>();
    for (const auto& f : m.at("gains")) c.gains.push_back(read_matrix_csv(dir / f.get<std::string>(), "gain"));
    for (const auto& f : m.at("transforms"))
      c.transforms.push_back(read_matrix_csv(dir / f.get<std::string>(), "transform"));
    if (c.gains.size() != c.stage_dims.size() || c.transforms.size() + 1 != c.gains.size())
      throw IoError(dir.string() + ": manifest lists inconsistent gains/transforms");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + "/manifest.json: " + e.what());
  }
}

LtiSystem read_system_csv(const fs::path& path) {
  const Mat ab = read_matrix_csv(path);
  const Index n = ab.rows();
  if (ab.cols() <= n) throw IoError(path.string() + ": expected [A|B] with at least one input column");
  return LtiSystem(ab.leftCols(n), ab.rightCols(ab.cols() - n));
}

}  // namespace forwardctl
