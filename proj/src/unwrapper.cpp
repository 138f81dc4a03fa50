#include "glassbox/unwrapper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "glassbox/error.hpp"
#include "glassbox/metrics.hpp"

namespace glassbox {

std::string ActivationPattern::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (const bool b : bits) s.push_back(b ? '1' : '0');
  return s;
}

ActivationPattern ActivationPattern::from_string(const std::string& s) {
  ActivationPattern p;
  for (const char c : s) {
    if (c != '0' && c != '1') throw DataError("invalid activation pattern '" + s + "'");
    p.bits.push_back(c == '1');
  }
  return p;
}

double LocalLinearModel::eta(std::span<const double> theta) const {
  return dot(w_eff, theta) + b_eff;
}

ActivationPattern pattern_from_hidden(std::span<const double> hidden_pre) {
  ActivationPattern p;
  p.bits.reserve(hidden_pre.size());
  for (const double z : hidden_pre) p.bits.push_back(z > 0.0);
  return p;
}

ActivationPattern activation_pattern(const ClassifierMlp& mlp, std::span<const double> theta) {
  if (theta.size() != mlp.w1.cols) throw UsageError("theta length differs from filter count");
  return pattern_from_hidden(hidden_pre_activation(mlp, theta));
}

EffectiveCoefficients extract_llm(const ClassifierMlp& mlp, const ActivationPattern& pattern) {
  const std::size_t k = mlp.b1.size();
  if (pattern.bits.size() != k) throw UsageError("pattern length differs from hidden units");
  EffectiveCoefficients out;
  out.w.assign(mlp.w1.cols, 0.0);
  out.b = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!pattern.bits[i]) continue;
    const auto row = mlp.w1.row(i);
    for (std::size_t j = 0; j < out.w.size(); ++j) out.w[j] += mlp.w2[i] * row[j];
    out.b += mlp.w2[i] * mlp.b1[i];
  }
  out.b += mlp.b2;
  return out;
}

std::vector<LocalLinearModel> enumerate_regions(const TextCnnModel& model,
                                                const std::vector<ForwardResult>& forward) {
  std::map<ActivationPattern, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < forward.size(); ++i) {
    groups[pattern_from_hidden(forward[i].hidden_pre)].push_back(i);
  }
  std::vector<LocalLinearModel> regions;
  regions.reserve(groups.size());
  for (auto& [pattern, members] : groups) {
    LocalLinearModel llm;
    llm.pattern = pattern;
    auto coef = extract_llm(model.classifier, pattern);
    llm.w_eff = std::move(coef.w);
    llm.b_eff = coef.b;
    llm.member_ids = std::move(members);
    regions.push_back(std::move(llm));
  }
  // groups iterates in pattern order, so stability gives the secondary key.
  std::stable_sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) {
    return a.member_ids.size() > b.member_ids.size();
  });
  return regions;
}

std::vector<LocalLinearModel> enumerate_regions(const TextCnnModel& model, const Dataset& ds) {
  return enumerate_regions(model, forward_all(model, ds));
}

std::size_t effective_region_count(const std::vector<LocalLinearModel>& regions) {
  std::set<std::vector<long long>> keys;
  for (const auto& r : regions) {
    std::vector<long long> key;
    key.reserve(r.w_eff.size() + 1);
    for (const double w : r.w_eff) key.push_back(std::llround(w * 1e8));
    key.push_back(std::llround(r.b_eff * 1e8));
    keys.insert(std::move(key));
  }
  return keys.size();
}

RegionStats region_stats(std::span<const double> w, double b,
                         std::span<const std::size_t> member_ids,
                         const std::vector<ForwardResult>& forward, std::span<const int> labels) {
  if (member_ids.empty()) throw UsageError("region has no members");
  if (labels.size() != forward.size()) throw UsageError("labels and forward results differ");
  std::vector<double> all_scores(forward.size());
  for (std::size_t i = 0; i < forward.size(); ++i) {
    all_scores[i] = predict_proba(dot(w, forward[i].pooled.theta) + b);
  }
  std::vector<double> local_scores;
  std::vector<int> local_labels;
  local_scores.reserve(member_ids.size());
  local_labels.reserve(member_ids.size());
  for (const auto id : member_ids) {
    if (id >= forward.size()) throw UsageError("member id out of range");
    local_scores.push_back(all_scores[id]);
    local_labels.push_back(labels[id]);
  }

  RegionStats s;
  s.count = member_ids.size();
  double sum = 0.0;
  for (const int y : local_labels) sum += y;
  s.response_mean = sum / static_cast<double>(s.count);
  double var = 0.0;
  for (const int y : local_labels) var += (y - s.response_mean) * (y - s.response_mean);
  s.response_std = std::sqrt(var / static_cast<double>(s.count));
  s.local_auc = auc(local_scores, local_labels);
  s.local_accuracy = accuracy(local_scores, local_labels);
  s.local_f1 = f1(local_scores, local_labels);
  s.global_auc = auc(all_scores, labels);
  s.global_accuracy = accuracy(all_scores, labels);
  s.global_f1 = f1(all_scores, labels);
  return s;
}

RegionStats region_stats(const LocalLinearModel& llm, const std::vector<ForwardResult>& forward,
                         std::span<const int> labels) {
  return region_stats(llm.w_eff, llm.b_eff, llm.member_ids, forward, labels);
}

RegionStats region_stats(const LocalLinearModel& llm, const TextCnnModel& model, const Dataset& ds) {
  const auto labels = ds.labels();
  return region_stats(llm, forward_all(model, ds), labels);
}

std::string format_stat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_stat(const std::optional<double>& v) { return v ? format_stat(*v) : "N/A"; }

std::string region_table_csv(const std::vector<RegionStats>& stats) {
  std::ostringstream os;
  os << "region_id,count,response_mean,response_std,local_auc,global_auc,local_accuracy,"
        "global_accuracy,local_f1,global_f1\n";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& s = stats[i];
    os << i + 1 << ',' << s.count << ',' << format_stat(s.response_mean) << ','
       << format_stat(s.response_std) << ',' << format_stat(s.local_auc) << ','
       << format_stat(s.global_auc) << ',' << format_stat(s.local_accuracy) << ','
       << format_stat(s.global_accuracy) << ',' << format_stat(s.local_f1) << ','
       << format_stat(s.global_f1) << '\n';
  }
  return os.str();
}

}  // namespace glassbox
