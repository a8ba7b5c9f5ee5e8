#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phylembed/matrix.hpp"

namespace phylembed {

enum class ClassWeight : std::uint8_t { None, Balanced };

struct SvmConfig {
  double C = 1.0;
  /// Kernel width; empty means "scale": 1 / (dim * var(X)).
  std::optional<double> gamma;
  ClassWeight class_weight = ClassWeight::Balanced;
  /// Stop once the maximal KKT violating pair gap drops below this.
  double tolerance = 1e-3;
  /// Iteration budget, in sweeps of n pair updates.
  std::size_t max_passes = 1000;
  std::size_t cache_mb = 256;
  /// Keep the dual objective after every iteration in train_meta.
  bool record_objective = false;

  void validate() const;
};

struct SvmTrainMeta {
  std::size_t iterations = 0;
  double final_violation = 0.0;
  bool converged = false;
  double dual_objective = 0.0;
  std::vector<double> objective_trace;
  /// Full dual solution and per-point box, kept for diagnostics.
  std::vector<double> alpha;
  std::vector<double> box;
};

struct SvmModel {
  Matrix support_vectors;
  std::vector<double> dual_coefs;  // alpha_i * y_i
  double bias = 0.0;
  double gamma = 1.0;
  SvmConfig config;
  SvmTrainMeta train_meta;

  std::size_t dim() const noexcept { return support_vectors.cols(); }
};

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

/// gamma = 1 / (dim * var(X)) over all entries; 1.0 when var(X) == 0.
double scale_gamma(const Matrix& X);

/// Soft-margin RBF SVM dual solved by SMO with second-order working-set
/// selection. `y` holds -1/+1.
SvmModel train_svm(const Matrix& X, std::span<const int> y, const SvmConfig& cfg);

double decision_function(const SvmModel& model, std::span<const double> x);
/// sign of the decision value; exact zero maps to +1.
int predict(const SvmModel& model, std::span<const double> x);

std::string svm_to_json(const SvmModel& model);
SvmModel svm_from_json(const std::string& text);

}  // namespace phylembed
