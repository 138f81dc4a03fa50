#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/corpus.hpp"
#include "glassbox/model.hpp"

namespace glassbox {

// bits[i] is true iff hidden unit i is strictly positive.
struct ActivationPattern {
  std::vector<bool> bits;

  std::string to_string() const;  // "0110..."
  static ActivationPattern from_string(const std::string& s);
  auto operator<=>(const ActivationPattern&) const = default;
};

struct LocalLinearModel {
  ActivationPattern pattern;
  std::vector<double> w_eff;  // one coefficient per filter
  double b_eff = 0.0;
  std::vector<std::size_t> member_ids;

  double eta(std::span<const double> theta) const;
};

struct RegionStats {
  std::size_t count = 0;
  double response_mean = 0.0;
  double response_std = 0.0;  // population standard deviation of labels
  std::optional<double> local_auc;
  double local_accuracy = 0.0;
  double local_f1 = 0.0;
  std::optional<double> global_auc;
  double global_accuracy = 0.0;
  double global_f1 = 0.0;
};

ActivationPattern activation_pattern(const ClassifierMlp& mlp, std::span<const double> theta);
ActivationPattern pattern_from_hidden(std::span<const double> hidden_pre);

struct EffectiveCoefficients {
  std::vector<double> w;
  double b = 0.0;
};

// w = W2 diag(a) W1, b = W2 diag(a) b1 + b2 for the 0/1 mask a.
EffectiveCoefficients extract_llm(const ClassifierMlp& mlp, const ActivationPattern& pattern);

// One model per observed pattern, ordered by descending member count and then
// by pattern bits.
std::vector<LocalLinearModel> enumerate_regions(const TextCnnModel& model,
                                                const std::vector<ForwardResult>& forward);
std::vector<LocalLinearModel> enumerate_regions(const TextCnnModel& model, const Dataset& ds);

// Distinct (w_eff, b_eff) after rounding every coefficient to 1e-8.
std::size_t effective_region_count(const std::vector<LocalLinearModel>& regions);

// Local metrics use the region's members; global metrics apply the region's
// linear model to every document. Scores are sigmoid(w . theta + b).
RegionStats region_stats(std::span<const double> w, double b,
                         std::span<const std::size_t> member_ids,
                         const std::vector<ForwardResult>& forward, std::span<const int> labels);
RegionStats region_stats(const LocalLinearModel& llm, const std::vector<ForwardResult>& forward,
                         std::span<const int> labels);
RegionStats region_stats(const LocalLinearModel& llm, const TextCnnModel& model, const Dataset& ds);

// Table-shaped CSV. Region ids are 1-based in table order; missing values
// are written as N/A.
std::string region_table_csv(const std::vector<RegionStats>& stats);

std::string format_stat(double v);  // fixed, 6 decimals
std::string format_stat(const std::optional<double>& v);

}  // namespace glassbox
