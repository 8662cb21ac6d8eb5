#include "adnfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "adnfm/errors.hpp"
#include "adnfm/model.hpp"

namespace adnfm {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ConfigError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw ConfigError(std::string(what) + ": empty input");
}

}  // namespace

std::optional<double> auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores.size(), labels.size(), "auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share their average.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double logloss(std::span<const double> probs, std::span<const double> labels) {
  check_lengths(probs.size(), labels.size(), "logloss");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) total += loss(probs[i], labels[i], Task::kCtr);
  return total / static_cast<double>(probs.size());
}

double rmse(std::span<const double> preds, std::span<const double> targets) {
  check_lengths(preds.size(), targets.size(), "rmse");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  return std::sqrt(total / static_cast<double>(preds.size()));
}

std::string MetricsReport::summary() const {
  char buf[64];
  std::string out;
  auto append = [&](const char* name) {
    const auto it = values.find(name);
    if (it == values.end()) return;
    std::snprintf(buf, sizeof(buf), "%s=%.6f", name, it->second);
    if (!out.empty()) out += '\t';
    out += buf;
  };
  if (values.count("rmse")) {
    append("rmse");
    return out;
  }
  if (auc_undefined) out = "auc=undefined";
  append("auc");
  append("logloss");
  return out;
}

}  // namespace adnfm
