#pragma once

#include <optional>
#include <span>

namespace glassbox {

// Fraction of samples where (score >= threshold) agrees with the label.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

// Mann-Whitney AUC with half credit for ties; empty when only one class is
// present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// F1 of the positive class at threshold; 0 when precision + recall is 0.
double f1(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

}  // namespace glassbox
