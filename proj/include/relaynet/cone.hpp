#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relaynet/core.hpp"

namespace relaynet {

/// Conic program in standard inequality form:
///
///   minimize    c' x
///   subject to  G x + s = h,   s in K,
///
/// where K is the product of the nonnegative orthant (the first `lin_dim`
/// rows) followed by second-order cones of the listed dimensions. A block of
/// dimension d means (s_0, s_1..d-1) with s_0 >= ||s_1..d-1||_2; dimension 1
/// degenerates to s_0 >= 0.
struct ConeProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  int lin_dim = 0;
  std::vector<int> soc_dims;

  // Optional names for plain-text dumps; empty vectors mean unnamed.
  std::vector<std::string> var_names;
  std::vector<std::string> row_names;

  int num_vars() const { return static_cast<int>(G.cols()); }
  int num_rows() const { return static_cast<int>(G.rows()); }
};

inline void validate(const ConeProgram& prog) {
  int cone_rows = prog.lin_dim;
  for (int d : prog.soc_dims) {
    if (d < 1) throw invalid_input("second-order cone dimension must be >= 1");
    cone_rows += d;
  }
  if (prog.lin_dim < 0) throw invalid_input("lin_dim must be >= 0");
  if (cone_rows != prog.num_rows()) {
    throw invalid_input("cone dimensions do not add up to the number of rows");
  }
  if (prog.c.size() != prog.num_vars()) throw invalid_input("c size does not match G");
  if (prog.h.size() != prog.num_rows()) throw invalid_input("h size does not match G");
  if (!prog.c.allFinite() || !prog.G.allFinite() || !prog.h.allFinite()) {
    throw invalid_input("cone program data must be finite");
  }
}

/// Plain-text serialization for external cross-checking: dimensions, cone
/// layout, then the objective and constraint coefficients as sparse triplets.
inline void dump_plain_text(const ConeProgram& prog, std::ostream& os) {
  os << "cone-program v1\n";
  os << "vars " << prog.num_vars() << "\n";
  os << "rows " << prog.num_rows() << "\n";
  os << "lin " << prog.lin_dim << "\n";
  os << "soc";
  for (int d : prog.soc_dims) os << " " << d;
  os << "\n";
  os.precision(17);
  for (int j = 0; j < prog.num_vars(); ++j) {
    if (!prog.var_names.empty()) os << "# var " << j << " = " << prog.var_names[j] << "\n";
  }
  for (int r = 0; r < prog.num_rows(); ++r) {
    if (!prog.row_names.empty()) os << "# row " << r << " = " << prog.row_names[r] << "\n";
  }
  for (int j = 0; j < prog.num_vars(); ++j) {
    if (prog.c(j) != 0.0) os << "c " << j << " " << prog.c(j) << "\n";
  }
  for (int r = 0; r < prog.num_rows(); ++r) {
    for (int j = 0; j < prog.num_vars(); ++j) {
      if (prog.G(r, j) != 0.0) os << "G " << r << " " << j << " " << prog.G(r, j) << "\n";
    }
  }
  for (int r = 0; r < prog.num_rows(); ++r) {
    if (prog.h(r) != 0.0) os << "h " << r << " " << prog.h(r) << "\n";
  }
  os << "end\n";
}

}  // namespace relaynet
