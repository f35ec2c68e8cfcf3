#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "sdecp/common.hpp"

namespace sdecp {

// Discretely observed path X_{t_0}, ..., X_{t_n} with t_i = i h.
// x is (n+1) x d; row i holds X_{t_i}.
struct Path {
  double h = 0.0;
  Eigen::MatrixXd x;

  Path() = default;
  Path(double step, Eigen::MatrixXd data);

  std::int64_t n() const { return x.rows() - 1; }
  int dim() const { return static_cast<int>(x.cols()); }
  double total_time() const { return static_cast<double>(n()) * h; }
  IndexRange full_range() const { return {0, n()}; }

  // Increment X_{t_i} - X_{t_{i-1}}, 1 <= i <= n.
  Eigen::VectorXd increment(std::int64_t i) const { return x.row(i) - x.row(i - 1); }

  void validate() const;
};

// CSV format: header "t,x1,...,xd", one observation per row, 17 significant
// digits, LF line endings.
void write_path_csv(const Path& path, const std::string& filename);
void write_path_csv(const Path& path, std::ostream& os);

// Throws DataError with the 1-based line number on malformed rows, NaN
// entries, or a non-uniform time grid.
Path read_path_csv(const std::string& filename);
Path read_path_csv(std::istream& is, const std::string& name);

}  // namespace sdecp
