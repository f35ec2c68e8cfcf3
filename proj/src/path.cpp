#include "sdecp/path.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace sdecp {

Path::Path(double step, Eigen::MatrixXd data) : h(step), x(std::move(data)) { validate(); }

void Path::validate() const {
  if (!(h > 0.0)) throw DataError("Path: step h must be positive");
  if (x.rows() < 3) throw DataError("Path: need at least 3 observations (n >= 2)");
  if (x.cols() < 1) throw DataError("Path: state dimension must be >= 1");
  if (!x.allFinite()) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!x.row(i).allFinite()) {
        std::ostringstream os;
        os << "Path: non-finite observation at index " << i;
        throw DataError(os.str());
      }
    }
  }
}

void write_path_csv(const Path& path, std::ostream& os) {
  os << "t";
  for (int j = 1; j <= path.dim(); ++j) os << ",x" << j;
  os << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < path.x.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(i) * path.h);
    os << buf;
    for (Eigen::Index j = 0; j < path.x.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", path.x(i, j));
      os << ',' << buf;
    }
    os << "\n";
  }
}

void write_path_csv(const Path& path, const std::string& filename) {
  std::ofstream os(filename, std::ios::binary);
  if (!os) throw DataError("cannot open '" + filename + "' for writing");
  write_path_csv(path, os);
  if (!os.good()) throw DataError("write failed for '" + filename + "'");
}

namespace {

double parse_field(const std::string& field, const std::string& name, std::int64_t line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    std::ostringstream os;
    os << name << ": malformed numeric field '" << field << "' at line " << line_no;
    throw DataError(os.str());
  }
  if (std::isnan(value)) {
    std::ostringstream os;
    os << name << ": NaN at line " << line_no;
    throw DataError(os.str());
  }
  return value;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Path read_path_csv(std::istream& is, const std::string& name) {
  std::string line;
  if (!std::getline(is, line)) throw DataError(name + ": empty file");
  auto header = split_csv(line);
  if (header.empty() || header[0] != "t") {
    throw DataError(name + ": header must start with 't' (line 1)");
  }
  int d = static_cast<int>(header.size()) - 1;
  if (d < 1) throw DataError(name + ": header names no state columns (line 1)");

  std::vector<double> times;
  std::vector<double> values;
  std::int64_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != d + 1) {
      std::ostringstream os;
      os << name << ": expected " << d + 1 << " fields, got " << fields.size() << " at line "
         << line_no;
      throw DataError(os.str());
    }
    times.push_back(parse_field(fields[0], name, line_no));
    for (int j = 1; j <= d; ++j) values.push_back(parse_field(fields[j], name, line_no));
  }
  std::int64_t rows = static_cast<std::int64_t>(times.size());
  if (rows < 3) throw DataError(name + ": need at least 3 observations");

  double h = times[1] - times[0];
  if (!(h > 0.0)) throw DataError(name + ": time grid must be strictly increasing");
  for (std::int64_t i = 1; i < rows; ++i) {
    double step = times[i] - times[i - 1];
    if (std::abs(step - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      std::ostringstream os;
      os << name << ": non-uniform time step at line " << i + 2;
      throw DataError(os.str());
    }
  }

  Eigen::MatrixXd x(rows, d);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = values[i * d + j];
  }
  return Path(h, std::move(x));
}

Path read_path_csv(const std::string& filename) {
  std::ifstream is(filename, std::ios::binary);
  if (!is) throw DataError("cannot open '" + filename + "'");
  return read_path_csv(is, filename);
}

}  // namespace sdecp
