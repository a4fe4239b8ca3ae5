#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfit {

// Rectangular dataset: covariates L, binary treatment A, real outcome Y.
struct ObservationTable {
  Eigen::MatrixXd covariates;               // n x p
  std::vector<std::string> covariate_names; // size p
  Eigen::VectorXd treatment;                // n, values in {0,1}
  Eigen::VectorXd outcome;                  // n
  std::vector<std::string> unit_ids;        // n opaque labels

  Eigen::Index n() const { return covariates.rows(); }
  Eigen::Index p() const { return covariates.cols(); }

  void validate() const {
    const Eigen::Index rows = covariates.rows();
    if (rows < 1) throw std::invalid_argument("ObservationTable: no units");
    if (covariates.cols() < 1)
      throw std::invalid_argument("ObservationTable: no covariate columns");
    if (treatment.size() != rows || outcome.size() != rows ||
        static_cast<Eigen::Index>(unit_ids.size()) != rows)
      throw std::invalid_argument("ObservationTable: column length mismatch");
    if (static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols())
      throw std::invalid_argument("ObservationTable: covariate name count mismatch");
    if (!covariates.allFinite() || !outcome.allFinite())
      throw std::invalid_argument("ObservationTable: non-finite values");
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double a = treatment[i];
      if (a != 0.0 && a != 1.0)
        throw std::invalid_argument("ObservationTable: treatment not binary at row " +
                                    std::to_string(i));
    }
  }
};

}  // namespace xfit
