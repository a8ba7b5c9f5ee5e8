#include "phylembed/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include <json.hpp>

#include "phylembed/error.hpp"

namespace phylembed {

void SvmConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("svm: C must be positive");
  if (gamma && !(*gamma > 0.0)) throw ConfigError("svm: gamma must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("svm: tolerance must be positive");
  if (max_passes == 0) throw ConfigError("svm: max_passes must be positive");
}

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size()) {
    throw ConfigError("rbf_kernel: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                      std::to_string(z.size()) + ")");
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - z[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double scale_gamma(const Matrix& X) {
  const auto& v = X.data();
  if (v.empty() || X.cols() == 0) return 1.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(X.cols()) * var);
}

namespace {

/// Kernel rows with least-recently-used eviction under a byte budget.
class KernelCache {
 public:
  KernelCache(const Matrix& X, double gamma, std::size_t budget_bytes)
      : X_(X), gamma_(gamma) {
    const std::size_t row_bytes = std::max<std::size_t>(1, X.rows() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    std::vector<double> values;
    if (index_.size() >= capacity_) {
      values = std::move(lru_.back().second);
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    values.resize(X_.rows());
    auto xi = X_.row(i);
    for (std::size_t j = 0; j < X_.rows(); ++j) values[j] = rbf_kernel(xi, X_.row(j), gamma_);
    lru_.emplace_front(i, std::move(values));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const Matrix& X_;
  double gamma_;
  std::size_t capacity_;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

constexpr double kTau = 1e-12;

}  // namespace

SvmModel train_svm(const Matrix& X, std::span<const int> y, const SvmConfig& cfg) {
  cfg.validate();
  const std::size_t n = X.rows();
  if (y.size() != n) throw ConfigError("train_svm: label count differs from row count");
  if (n < 2) throw ConfigError("train_svm: need at least two samples");
  std::size_t n_pos = 0, n_neg = 0;
  for (int label : y) {
    if (label == 1) ++n_pos;
    else if (label == -1) ++n_neg;
    else throw ConfigError("train_svm: labels must be -1 or +1");
  }
  if (n_pos == 0 || n_neg == 0) throw ConfigError("train_svm: both classes must be present");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw NumericError("train_svm: non-finite feature value");
  }

  SvmModel model;
  model.config = cfg;
  model.gamma = cfg.gamma ? *cfg.gamma : scale_gamma(X);

  std::vector<double> box(n);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (cfg.class_weight == ClassWeight::Balanced) {
      w = static_cast<double>(n) / (2.0 * static_cast<double>(y[i] == 1 ? n_pos : n_neg));
    }
    box[i] = cfg.C * w;
  }

  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  KernelCache cache(X, model.gamma, cfg.cache_mb * 1024 * 1024);
  auto yd = [&](std::size_t i) { return static_cast<double>(y[i]); };
  auto upper = [&](std::size_t i) { return alpha[i] >= box[i]; };
  auto lower = [&](std::size_t i) { return alpha[i] <= 0.0; };
  auto objective = [&] {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) f += alpha[i] * (grad[i] - 1.0);
    return -0.5 * f;
  };

  const std::size_t max_iter = cfg.max_passes * std::max<std::size_t>(n, 100);
  std::size_t iter = 0;
  double gap = 0.0;
  bool converged = false;
  if (cfg.record_objective) model.train_meta.objective_trace.push_back(0.0);

  while (iter < max_iter) {
    // Maximal violating index i, then j by largest second-order decrease.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) { gmax = -grad[t]; i = t; }
      } else {
        if (!lower(t) && grad[t] >= gmax) { gmax = grad[t]; i = t; }
      }
    }
    if (i == n) {
      gap = 0.0;
      converged = true;
      break;
    }
    const auto& ki = cache.row(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      double grad_diff;
      if (y[t] == 1) {
        if (lower(t)) continue;
        grad_diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
      } else {
        if (upper(t)) continue;
        grad_diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
      }
      if (grad_diff > 0.0) {
        double a = 2.0 - 2.0 * ki[t];  // K_ii = K_tt = 1 for the RBF kernel
        if (a <= 0.0) a = kTau;
        const double obj = -(grad_diff * grad_diff) / a;
        if (obj <= best) { best = obj; j = t; }
      }
    }
    gap = gmax + gmax2;
    if (gap < cfg.tolerance || j == n) {
      converged = true;
      break;
    }
    ++iter;

    const auto& kj = cache.row(j);
    const auto& kri = cache.row(i);  // i's row may have been evicted by j
    const double ci = box[i], cj = box[j];
    const double old_i = alpha[i], old_j = alpha[j];
    const double qij = yd(i) * yd(j) * kri[j];
    if (y[i] != y[j]) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) { alpha[i] = ci; alpha[j] = ci - diff; }
      } else {
        if (alpha[j] > cj) { alpha[j] = cj; alpha[i] = cj + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) { alpha[i] = ci; alpha[j] = sum - ci; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > cj) {
        if (alpha[j] > cj) { alpha[j] = cj; alpha[i] = sum - cj; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += yd(t) * (yd(i) * kri[t] * di + yd(j) * kj[t] * dj);
    }
    if (cfg.record_objective) model.train_meta.objective_trace.push_back(objective());
  }

  // Bias: mean over free vectors, midpoint of the feasible interval otherwise.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = yd(t) * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  model.bias = -rho;

  model.support_vectors = Matrix(0, X.cols());
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.append_row(X.row(t));
      model.dual_coefs.push_back(alpha[t] * yd(t));
    }
  }
  model.train_meta.iterations = iter;
  model.train_meta.final_violation = gap;
  model.train_meta.converged = converged;
  model.train_meta.dual_objective = objective();
  model.train_meta.alpha = std::move(alpha);
  model.train_meta.box = std::move(box);
  return model;
}

double decision_function(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    throw ConfigError("decision_function: expected dimension " + std::to_string(model.dim()) +
                      ", got " + std::to_string(x.size()));
  }
  double f = model.bias;
  for (std::size_t i = 0; i < model.dual_coefs.size(); ++i) {
    f += model.dual_coefs[i] * rbf_kernel(model.support_vectors.row(i), x, model.gamma);
  }
  return f;
}

int predict(const SvmModel& model, std::span<const double> x) {
  return decision_function(model, x) >= 0.0 ? 1 : -1;
}

// ---------------------------------------------------------------------------
// JSON

std::string svm_to_json(const SvmModel& model) {
  using nlohmann::json;
  json sv = json::array();
  for (std::size_t i = 0; i < model.support_vectors.rows(); ++i) {
    auto r = model.support_vectors.row(i);
    sv.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json cfg = {{"C", model.config.C},
              {"class_weight", model.config.class_weight == ClassWeight::Balanced ? "balanced" : "none"},
              {"tolerance", model.config.tolerance},
              {"max_passes", model.config.max_passes}};
  if (model.config.gamma) cfg["gamma"] = *model.config.gamma;
  else cfg["gamma"] = "scale";
  json j = {{"gamma", model.gamma},
            {"bias", model.bias},
            {"dim", model.dim()},
            {"dual_coefs", model.dual_coefs},
            {"support_vectors", sv},
            {"config", cfg},
            {"train_meta",
             {{"iterations", model.train_meta.iterations},
              {"final_violation", model.train_meta.final_violation},
              {"converged", model.train_meta.converged},
              {"dual_objective", model.train_meta.dual_objective}}}};
  return j.dump();
}

SvmModel svm_from_json(const std::string& text) {
  using nlohmann::json;
  SvmModel m;
  try {
    json j = json::parse(text);
    m.gamma = j.at("gamma").get<double>();
    m.bias = j.at("bias").get<double>();
    m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
    const auto dim = j.at("dim").get<std::size_t>();
    m.support_vectors = Matrix(0, dim);
    for (const auto& row : j.at("support_vectors")) {
      auto v = row.get<std::vector<double>>();
      if (v.size() != dim) throw ParseError("svm json: support vector dimension mismatch");
      m.support_vectors.append_row(v);
    }
    if (m.support_vectors.rows() != m.dual_coefs.size()) {
      throw ParseError("svm json: support vector / coefficient count mismatch");
    }
    const auto& cfg = j.at("config");
    m.config.C = cfg.at("C").get<double>();
    m.config.class_weight =
        cfg.at("class_weight").get<std::string>() == "balanced" ? ClassWeight::Balanced : ClassWeight::None;
    m.config.tolerance = cfg.at("tolerance").get<double>();
    m.config.max_passes = cfg.at("max_passes").get<std::size_t>();
    if (cfg.at("gamma").is_number()) m.config.gamma = cfg.at("gamma").get<double>();
    const auto& meta = j.at("train_meta");
    m.train_meta.iterations = meta.at("iterations").get<std::size_t>();
    m.train_meta.final_violation = meta.at("final_violation").get<double>();
    m.train_meta.converged = meta.at("converged").get<bool>();
    m.train_meta.dual_objective = meta.at("dual_objective").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("svm json: ") + e.what());
  }
  return m;
}

}  // namespace phylembed
