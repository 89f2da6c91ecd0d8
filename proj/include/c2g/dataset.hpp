#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "c2g/types.hpp"

namespace c2g {

/// Observational sample: covariates, outcomes, treatment indicators and, for
/// simulated data, the latent response labels. Immutable once validated.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXi t;
  std::optional<Eigen::VectorXi> h;

  Index n() const { return y.size(); }
  Index d() const { return x.cols(); }
  bool has_truth() const { return h.has_value(); }
};

/// Throws ValidationError describing the first violated invariant. Rows in
/// messages are numbered from 1.
void validate(const Dataset& ds);

Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXi t,
                     std::optional<Eigen::VectorXi> h = std::nullopt);

/// Reads the CSV schema x1..xd, y, t[, h]. Lines starting with '#' are
/// treated as comments. With `require_truth` the h column must be present;
/// otherwise it is loaded when present.
Dataset load_dataset(const std::filesystem::path& path, bool require_truth = false);

/// Writes 17-significant-digit decimal text. `comment` lines are emitted
/// first, each prefixed with "# ".
void write_dataset(const std::filesystem::path& path, const Dataset& ds,
                   const std::vector<std::string>& comment = {});

struct TreatmentSplit {
  IndexList treated;
  IndexList untreated;
};

/// Throws ValidationError if either group is empty.
TreatmentSplit split_by_treatment(const Dataset& ds);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const IndexList& rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const IndexList& rows);

}  // namespace c2g
