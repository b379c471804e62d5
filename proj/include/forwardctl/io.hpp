#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "forwardctl/cascade.hpp"
#include "forwardctl/lmi.hpp"
#include "forwardctl/numerics.hpp"
#include "forwardctl/sylvester.hpp"
#include "forwardctl/sysdata.hpp"

namespace forwardctl {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

// Matrix CSV: a `kind,rows,cols` header row, one `<kind>,<rows>,<cols>` row,
// then the values row by row in round-trip precision.
std::string matrix_csv(const std::string& kind, const Eigen::Ref<const Mat>& m);
void write_matrix_csv(const fs::path& path, const std::string& kind, const Eigen::Ref<const Mat>& m);
// Throws IoError on malformed files or, when `kind` is non-empty, a kind mismatch.
Mat read_matrix_csv(const fs::path& path, const std::string& kind = "");

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

// x_minus.csv, x_plus.csv, u_minus.csv
void write_batch(const fs::path& dir, const DataBatch& b);
DataBatch read_batch(const fs::path& dir);

// dx_minus.csv, dx_plus.csv, du_minus.csv, d_minus.csv
void write_ledger(const fs::path& dir, const NoiseLedger& l);
NoiseLedger read_ledger(const fs::path& dir);
bool has_ledger(const fs::path& dir);

// <stem>_g.csv, <stem>_theta.csv, <stem>.json
void write_sylvester_certificate(const fs::path& dir, const std::string& stem,
                                 const SylvesterCertificate& c);
// <stem>_k.csv, <stem>_q.csv, <stem>_g_k.csv, <stem>.json
void write_gain_certificate(const fs::path& dir, const std::string& stem, const GainCertificate& c);

// gain_<i>.csv, transform_<i>.csv and manifest.json.
void write_controller(const fs::path& dir, const ForwardingController& c, const std::string& mode,
                      const DesignTrace& trace);
ForwardingController read_controller(const fs::path& dir);

// [A|B] fixture layout.
LtiSystem read_system_csv(const fs::path& path);

}  // namespace forwardctl
