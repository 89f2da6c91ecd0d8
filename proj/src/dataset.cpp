#include "c2g/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "c2g/error.hpp"

namespace c2g {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, Index row, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("row " + std::to_string(row) + ": column '" + column +
                          "' is not a number: '" + s + "'");
  }
  if (!std::isfinite(v)) {
    throw ValidationError("row " + std::to_string(row) + ": column '" + column +
                          "' is not finite");
  }
  return v;
}

int parse_binary(const std::string& s, Index row, const std::string& column) {
  const double v = parse_double(s, row, column);
  if (v != 0.0 && v != 1.0) {
    throw ValidationError("row " + std::to_string(row) + ": column '" + column +
                          "' must be 0 or 1, got " + s);
  }
  return static_cast<int>(v);
}

}  // namespace

void validate(const Dataset& ds) {
  const Index n = ds.y.size();
  if (n < 1) throw ValidationError("dataset must contain at least one row");
  if (ds.x.cols() < 1) throw ValidationError("dataset must contain at least one covariate");
  if (ds.x.rows() != n || ds.t.size() != n) {
    throw ValidationError("dataset columns have mismatched lengths");
  }
  if (ds.h && ds.h->size() != n) throw ValidationError("h column length mismatch");
  for (Index i = 0; i < n; ++i) {
    if (!ds.x.row(i).allFinite() || !std::isfinite(ds.y[i])) {
      throw ValidationError("row " + std::to_string(i + 1) + ": non-finite value");
    }
    if (ds.t[i] != 0 && ds.t[i] != 1) {
      throw ValidationError("row " + std::to_string(i + 1) + ": t must be 0 or 1");
    }
    if (ds.h) {
      const int h = (*ds.h)[i];
      if (h != 0 && h != 1) throw ValidationError("row " + std::to_string(i + 1) + ": h must be 0 or 1");
      if (h == 1 && ds.t[i] == 0) {
        throw ValidationError("row " + std::to_string(i + 1) + ": h=1 with t=0");
      }
    }
  }
}

Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXi t,
                     std::optional<Eigen::VectorXi> h) {
  Dataset ds{std::move(x), std::move(y), std::move(t), std::move(h)};
  validate(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, bool require_truth) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw ValidationError("dataset '" + path.string() + "' has no header");

  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) col[header[j]] = j;

  std::vector<std::size_t> x_cols;
  for (int j = 1;; ++j) {
    auto it = col.find("x" + std::to_string(j));
    if (it == col.end()) break;
    x_cols.push_back(it->second);
  }
  if (x_cols.empty()) throw ValidationError("missing column 'x1'");
  for (const char* name : {"y", "t"}) {
    if (!col.contains(name)) throw ValidationError(std::string("missing column '") + name + "'");
  }
  const bool has_h = col.contains("h");
  if (require_truth && !has_h) throw ValidationError("missing column 'h'");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    rows.push_back(split_csv_line(line));
  }
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(x_cols.size());
  Dataset ds;
  ds.x.resize(n, d);
  ds.y.resize(n);
  ds.t.resize(n);
  if (has_h) ds.h = Eigen::VectorXi(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.size() != header.size()) {
      throw ValidationError("row " + std::to_string(i + 1) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(r.size()));
    }
    for (Index j = 0; j < d; ++j) {
      ds.x(i, j) = parse_double(r[x_cols[static_cast<std::size_t>(j)]], i + 1,
                                "x" + std::to_string(j + 1));
    }
    ds.y[i] = parse_double(r[col["y"]], i + 1, "y");
    ds.t[i] = parse_binary(r[col["t"]], i + 1, "t");
    if (has_h) (*ds.h)[i] = parse_binary(r[col["h"]], i + 1, "h");
  }
  validate(ds);
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds,
                   const std::vector<std::string>& comment) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset '" + path.string() + "'");
  for (const auto& c : comment) out << "# " << c << '\n';
  for (Index j = 0; j < ds.d(); ++j) out << 'x' << (j + 1) << ',';
  out << "y,t";
  if (ds.h) out << ",h";
  out << '\n';
  out.precision(17);
  for (Index i = 0; i < ds.n(); ++i) {
    for (Index j = 0; j < ds.d(); ++j) out << ds.x(i, j) << ',';
    out << ds.y[i] << ',' << ds.t[i];
    if (ds.h) out << ',' << (*ds.h)[i];
    out << '\n';
  }
  if (!out) throw ValidationError("failed writing dataset '" + path.string() + "'");
}

TreatmentSplit split_by_treatment(const Dataset& ds) {
  TreatmentSplit split;
  for (Index i = 0; i < ds.n(); ++i) {
    (ds.t[i] == 1 ? split.treated : split.untreated).push_back(i);
  }
  if (split.treated.empty()) throw ValidationError("no treated samples (t=1)");
  if (split.untreated.empty()) throw ValidationError("no untreated samples (t=0)");
  return split;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const IndexList& rows) {
  return m(rows, Eigen::all);
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const IndexList& rows) {
  return v(rows);
}

}  // namespace c2g
