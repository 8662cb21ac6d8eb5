#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace adnfm {

// Probability that a random positive outscores a random negative, ties
// credited one half, via the Mann-Whitney rank sum with averaged tie ranks.
// nullopt when either class is empty. Labels above 0.5 count as positive.
std::optional<double> auc(std::span<const double> scores, std::span<const double> labels);

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double logloss(std::span<const double> probs, std::span<const double> labels);

double rmse(std::span<const double> preds, std::span<const double> targets);

struct MetricsReport {
  std::map<std::string, double> values;
  std::size_t n_samples = 0;
  std::size_t n_positive = 0;
  bool auc_undefined = false;

  // "auc=...\tlogloss=..." or "rmse=..." with 6 decimals.
  std::string summary() const;
};

}  // namespace adnfm
