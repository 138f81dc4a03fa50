#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glassbox/corpus.hpp"
#include "glassbox/merging.hpp"
#include "glassbox/model.hpp"
#include "glassbox/unwrapper.hpp"

namespace glassbox {

enum class Direction { kPositive, kNegative };

struct RankedFilter {
  std::size_t filter_id = 0;
  double weight = 0.0;
};

struct FilterAttribution {
  std::size_t filter_id = 0;
  double weight = 0.0;
  std::optional<std::vector<std::string>> ngram;
  std::optional<std::size_t> window_start;
};

// A linear model over theta plus the documents it covers.
struct ReportRegion {
  std::size_t region_id = 0;  // 1-based
  std::vector<double> w;
  double b = 0.0;
  std::vector<std::size_t> member_ids;
};

inline constexpr std::size_t kHistogramBins = 50;

struct SampleRow {
  std::size_t sample_id = 0;
  int label = 0;
  double score = 0.0;
  std::vector<FilterAttribution> attributions;  // one per ranked filter, same order
};

struct RegionReport {
  std::size_t region_id = 0;
  std::size_t count = 0;
  std::vector<RankedFilter> positive_filters;
  std::vector<RankedFilter> negative_filters;
  std::vector<SampleRow> top_positive;  // highest scores first
  std::vector<SampleRow> top_negative;  // lowest scores first
  std::array<std::size_t, kHistogramBins> histogram{};
};

struct InterpretationReport {
  std::vector<RegionReport> regions;
};

// Positive: weights > 0, descending. Negative: weights < 0, ascending. Ties
// by filter id. At most top_k entries.
std::vector<RankedFilter> rank_filters(std::span<const double> weights, Direction direction,
                                       std::size_t top_k);

// Token string at a padded position: the original token, <OOV>, or <PAD>.
std::string token_at(const TokenizedDocument& doc, std::size_t position);

FilterAttribution ngram_for_filter(const TextCnnModel& model, const TokenizedDocument& doc,
                                   std::size_t filter_id);
FilterAttribution ngram_for_filter(const TextCnnModel& model, const TokenizedDocument& doc,
                                   const PooledFeatures& pooled, std::size_t filter_id);

// Members sorted by score (descending for kPositive, ascending for
// kNegative), ties by sample id; first k. scores[i] belongs to members[i].
std::vector<std::size_t> top_samples(std::span<const std::size_t> members,
                                     std::span<const double> scores, std::size_t k,
                                     Direction direction);

std::array<std::size_t, kHistogramBins> score_histogram(std::span<const double> scores);

std::vector<ReportRegion> report_regions(const std::vector<LocalLinearModel>& regions);
// Assigns every document of the forward pass to its merged region.
std::vector<ReportRegion> report_regions(const MergedModel& merged,
                                         const std::vector<ForwardResult>& forward);

// Regions with more than one member are reported; if none has, all are.
InterpretationReport build_report(const TextCnnModel& model, const std::vector<ReportRegion>& regions,
                                  const Dataset& ds, const std::vector<ForwardResult>& forward,
                                  std::size_t top_k_filters, std::size_t top_k_samples);
InterpretationReport build_report(const TextCnnModel& model, const std::vector<ReportRegion>& regions,
                                  const Dataset& ds, std::size_t top_k_filters,
                                  std::size_t top_k_samples);

std::string report_to_markdown(const InterpretationReport& report);
nlohmann::json report_to_json(const InterpretationReport& report);
std::string histogram_csv(const RegionReport& region);

}  // namespace glassbox
