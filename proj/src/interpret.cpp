#include "glassbox/interpret.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "glassbox/error.hpp"

namespace glassbox {

std::vector<RankedFilter> rank_filters(std::span<const double> weights, Direction direction,
                                       std::size_t top_k) {
  if (top_k < 1) throw UsageError("top_k must be >= 1");
  std::vector<RankedFilter> out;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double w = weights[j];
    if ((direction == Direction::kPositive && w > 0.0) ||
        (direction == Direction::kNegative && w < 0.0)) {
      out.push_back({j, w});
    }
  }
  std::stable_sort(out.begin(), out.end(), [direction](const auto& a, const auto& b) {
    return direction == Direction::kPositive ? a.weight > b.weight : a.weight < b.weight;
  });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

std::string token_at(const TokenizedDocument& doc, std::size_t position) {
  const TokenId id = doc.ids.at(position);
  if (id == kPadId) return std::string(kPadToken);
  if (id == kOovId) return std::string(kOovToken);
  return doc.tokens.at(position);
}

FilterAttribution ngram_for_filter(const TextCnnModel& model, const TokenizedDocument& doc,
                                   const PooledFeatures& pooled, std::size_t filter_id) {
  if (filter_id >= model.filters.size()) {
    throw UsageError("filter id " + std::to_string(filter_id) + " out of range");
  }
  FilterAttribution a;
  a.filter_id = filter_id;
  a.window_start = pooled.window.at(filter_id);
  if (a.window_start) {
    std::vector<std::string> ngram;
    for (std::size_t t = 0; t < model.filters[filter_id].width; ++t) {
      ngram.push_back(token_at(doc, *a.window_start + t));
    }
    a.ngram = std::move(ngram);
  }
  return a;
}

FilterAttribution ngram_for_filter(const TextCnnModel& model, const TokenizedDocument& doc,
                                   std::size_t filter_id) {
  if (filter_id >= model.filters.size()) {
    throw UsageError("filter id " + std::to_string(filter_id) + " out of range");
  }
  return ngram_for_filter(model, doc, forward(model, doc.ids).pooled, filter_id);
}

std::vector<std::size_t> top_samples(std::span<const std::size_t> members,
                                     std::span<const double> scores, std::size_t k,
                                     Direction direction) {
  if (members.size() != scores.size()) throw UsageError("members and scores differ in length");
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return direction == Direction::kPositive ? scores[a] > scores[b] : scores[a] < scores[b];
    }
    return members[a] < members[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(members[order[i]]);
  return out;
}

std::array<std::size_t, kHistogramBins> score_histogram(std::span<const double> scores) {
  std::array<std::size_t, kHistogramBins> bins{};
  for (const double s : scores) {
    auto b = static_cast<std::size_t>(std::clamp(s, 0.0, 1.0) * kHistogramBins);
    ++bins[std::min(b, kHistogramBins - 1)];
  }
  return bins;
}

std::vector<ReportRegion> report_regions(const std::vector<LocalLinearModel>& regions) {
  std::vector<ReportRegion> out;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    out.push_back({i + 1, regions[i].w_eff, regions[i].b_eff, regions[i].member_ids});
  }
  return out;
}

std::vector<ReportRegion> report_regions(const MergedModel& merged,
                                         const std::vector<ForwardResult>& forward) {
  std::vector<ReportRegion> out;
  for (std::size_t c = 0; c < merged.regions.size(); ++c) {
    out.push_back({c + 1, merged.regions[c].refit_w, merged.regions[c].refit_b, {}});
  }
  for (std::size_t i = 0; i < forward.size(); ++i) out[merged.assign(forward[i])].member_ids.push_back(i);
  return out;
}

namespace {

std::vector<SampleRow> sample_rows(const TextCnnModel& model, const Dataset& ds,
                                   const std::vector<ForwardResult>& forward,
                                   const std::vector<std::size_t>& ids,
                                   const std::vector<std::size_t>& members,
                                   const std::vector<double>& scores,
                                   const std::vector<RankedFilter>& filters) {
  std::vector<SampleRow> rows;
  for (const auto id : ids) {
    SampleRow row;
    row.sample_id = id;
    row.label = ds.documents[id].label;
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(members.begin(), members.end(), id) - members.begin());
    row.score = scores[pos];
    for (const auto& f : filters) {
      auto a = ngram_for_filter(model, ds.documents[id], forward[id].pooled, f.filter_id);
      a.weight = f.weight;
      row.attributions.push_back(std::move(a));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

InterpretationReport build_report(const TextCnnModel& model, const std::vector<ReportRegion>& regions,
                                  const Dataset& ds, const std::vector<ForwardResult>& forward,
                                  std::size_t top_k_filters, std::size_t top_k_samples) {
  if (regions.empty()) throw UsageError("no regions to report");
  if (forward.size() != ds.size()) throw UsageError("forward results do not match the dataset");
  const bool any_multi = std::any_of(regions.begin(), regions.end(),
                                     [](const auto& r) { return r.member_ids.size() > 1; });
  InterpretationReport report;
  for (const auto& region : regions) {
    if (region.member_ids.empty() || (any_multi && region.member_ids.size() < 2)) continue;
    std::vector<std::size_t> members = region.member_ids;
    std::sort(members.begin(), members.end());
    std::vector<double> scores;
    scores.reserve(members.size());
    for (const auto id : members) {
      scores.push_back(predict_proba(dot(region.w, forward[id].pooled.theta) + region.b));
    }

    RegionReport rr;
    rr.region_id = region.region_id;
    rr.count = members.size();
    rr.positive_filters = rank_filters(region.w, Direction::kPositive, top_k_filters);
    rr.negative_filters = rank_filters(region.w, Direction::kNegative, top_k_filters);
    rr.top_positive =
        sample_rows(model, ds, forward, top_samples(members, scores, top_k_samples, Direction::kPositive),
                    members, scores, rr.positive_filters);
    rr.top_negative =
        sample_rows(model, ds, forward, top_samples(members, scores, top_k_samples, Direction::kNegative),
                    members, scores, rr.negative_filters);
    rr.histogram = score_histogram(scores);
    report.regions.push_back(std::move(rr));
  }
  return report;
}

InterpretationReport build_report(const TextCnnModel& model, const std::vector<ReportRegion>& regions,
                                  const Dataset& ds, std::size_t top_k_filters,
                                  std::size_t top_k_samples) {
  return build_report(model, regions, ds, forward_all(model, ds), top_k_filters, top_k_samples);
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string cell_text(const FilterAttribution& a) {
  if (!a.ngram) return "(none)";
  std::string s;
  for (std::size_t i = 0; i < a.ngram->size(); ++i) {
    if (i) s += ' ';
    for (const char c : (*a.ngram)[i]) {
      if (c == '|') s += '\\';
      s += c;
    }
  }
  return s;
}

void table(std::ostringstream& os, const std::vector<RankedFilter>& filters,
           const std::vector<SampleRow>& rows) {
  os << "| Sample ID | Label | Predict |";
  for (const auto& f : filters) os << " Filter " << f.filter_id << " |";
  os << "\n|---|---|---|";
  for (std::size_t i = 0; i < filters.size(); ++i) os << "---|";
  os << "\n| Weight (β) | | |";
  for (const auto& f : filters) os << ' ' << fmt("%.6f", f.weight) << " |";
  os << '\n';
  for (const auto& row : rows) {
    os << "| " << row.sample_id << " | " << row.label << " | " << fmt("%.6g", row.score) << " |";
    for (const auto& a : row.attributions) os << ' ' << cell_text(a) << " |";
    os << '\n';
  }
}

nlohmann::json rows_json(const std::vector<SampleRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& row : rows) {
    auto attrs = nlohmann::json::array();
    for (const auto& a : row.attributions) {
      attrs.push_back({{"filter_id", a.filter_id},
                       {"weight", a.weight},
                       {"ngram", a.ngram ? nlohmann::json(*a.ngram) : nlohmann::json(nullptr)},
                       {"window_start",
                        a.window_start ? nlohmann::json(*a.window_start) : nlohmann::json(nullptr)}});
    }
    out.push_back({{"sample_id", row.sample_id},
                   {"label", row.label},
                   {"score", row.score},
                   {"attributions", std::move(attrs)}});
  }
  return out;
}

nlohmann::json filters_json(const std::vector<RankedFilter>& filters) {
  auto out = nlohmann::json::array();
  for (const auto& f : filters) out.push_back({{"filter_id", f.filter_id}, {"weight", f.weight}});
  return out;
}

}  // namespace

std::string report_to_markdown(const InterpretationReport& report) {
  std::ostringstream os;
  os << "# Interpretation report\n";
  for (const auto& r : report.regions) {
    os << "\n## Region " << r.region_id << " (" << r.count << " samples)\n\n";
    os << "### Highest-scoring samples, positive filters\n\n";
    table(os, r.positive_filters, r.top_positive);
    os << "\n### Lowest-scoring samples, negative filters\n\n";
    table(os, r.negative_filters, r.top_negative);
  }
  return os.str();
}

nlohmann::json report_to_json(const InterpretationReport& report) {
  auto regions = nlohmann::json::array();
  for (const auto& r : report.regions) {
    regions.push_back({{"region_id", r.region_id},
                       {"count", r.count},
                       {"positive_filters", filters_json(r.positive_filters)},
                       {"negative_filters", filters_json(r.negative_filters)},
                       {"top_positive", rows_json(r.top_positive)},
                       {"top_negative", rows_json(r.top_negative)},
                       {"histogram", r.histogram}});
  }
  return {{"histogram_bins", kHistogramBins}, {"regions", std::move(regions)}};
}

std::string histogram_csv(const RegionReport& region) {
  std::ostringstream os;
  os << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    os << fmt("%.2f", static_cast<double>(b) / kHistogramBins) << ','
       << fmt("%.2f", static_cast<double>(b + 1) / kHistogramBins) << ',' << region.histogram[b]
       << '\n';
  }
  return os.str();
}

}  // namespace glassbox
