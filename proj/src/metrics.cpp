#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "phylembed/error.hpp"
#include "phylembed/evaluate.hpp"

namespace phylembed {

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ConfigError("f1_score: " + std::to_string(predictions.size()) + " predictions for " +
                      std::to_string(labels.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1, truth = labels[i] == 1;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  if (tp == 0) return 0.0;  // P + R = 0, or both zero-denominator
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ConfigError("roc_auc: length mismatch");
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::isnan(scores[i])) throw NumericError("roc_auc: NaN score");
    (labels[i] == 1 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) throw ConfigError("roc_auc: both classes must be present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Count in half units: each (pos, neg) pair contributes 2 if pos wins, 1 on a tie.
  std::uint64_t twice = 0, neg_below = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t e = g;
    std::uint64_t pos = 0, neg = 0;
    while (e < order.size() && scores[order[e]] == scores[order[g]]) {
      (labels[order[e]] == 1 ? pos : neg) += 1;
      ++e;
    }
    twice += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
    g = e;
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// ---------------------------------------------------------------------------
// Splits

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) throw ConfigError("split: every ratio must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1");
}

namespace {

std::array<std::size_t, 3> apportion(std::size_t n, const SplitSpec& spec, bool fill_empty) {
  const std::array<double, 3> ratio{spec.train, spec.val, spec.test};
  std::array<std::size_t, 3> count{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double quota = static_cast<double>(n) * ratio[s];
    count[s] = static_cast<std::size_t>(std::floor(quota));
    frac[s] = quota - std::floor(quota);
    assigned += count[s];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++count[order[r % 3]];
  if (fill_empty && n >= 3) {
    // An empty part has quota below one; borrow from the part furthest above its
    // quota. Very small classes can still end up more than one off; the caller rejects those.
    for (int s = 0; s < 3; ++s) {
      if (count[s] != 0) continue;
      int donor = -1;
      double surplus = -1.0;
      for (int d = 0; d < 3; ++d) {
        const double over = static_cast<double>(count[d]) - static_cast<double>(n) * ratio[d];
        if (count[d] > 1 && over > surplus) {
          surplus = over;
          donor = d;
        }
      }
      --count[donor];
      ++count[s];
    }
  }
  return count;
}

}  // namespace

Split stratified_split(std::span<const int> labels, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratified) {
    groups.resize(2);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) throw ConfigError("stratified_split: labels must be 0/1");
      groups[static_cast<std::size_t>(labels[i])].push_back(i);
    }
  } else {
    groups.resize(1);
    groups[0].resize(labels.size());
    std::iota(groups[0].begin(), groups[0].end(), 0);
  }
  Rng rng(derive_seed(spec.seed, "split"));
  Split out;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& members = groups[c];
    const auto count = apportion(members.size(), spec, spec.stratified);
    const std::array<double, 3> ratio{spec.train, spec.val, spec.test};
    bool off = false;
    for (int s = 0; s < 3; ++s) {
      off = off || std::abs(static_cast<double>(count[s]) - static_cast<double>(members.size()) * ratio[s]) > 1.0;
    }
    if (spec.stratified && (count[0] == 0 || count[1] == 0 || count[2] == 0 || off)) {
      throw ConfigError("stratified_split: class " + std::to_string(c) + " with " +
                        std::to_string(members.size()) + " samples is too small to stratify");
    }
    rng.shuffle(members.begin(), members.end());
    auto it = members.begin();
    out.train.insert(out.train.end(), it, it + static_cast<long>(count[0]));
    it += static_cast<long>(count[0]);
    out.val.insert(out.val.end(), it, it + static_cast<long>(count[1]));
    it += static_cast<long>(count[1]);
    out.test.insert(out.test.end(), it, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

IdSplit stratified_split(std::span<const std::string> ids, std::span<const int> labels,
                         const SplitSpec& spec) {
  if (ids.size() != labels.size()) throw ConfigError("stratified_split: ids/labels length mismatch");
  auto idx = stratified_split(labels, spec);
  IdSplit out;
  for (auto i : idx.train) out.train.push_back(ids[i]);
  for (auto i : idx.val) out.val.push_back(ids[i]);
  for (auto i : idx.test) out.test.push_back(ids[i]);
  return out;
}

}  // namespace phylembed
