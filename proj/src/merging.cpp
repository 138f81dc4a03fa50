#include "glassbox/merging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "glassbox/checkpoint.hpp"
#include "glassbox/error.hpp"
#include "glassbox/metrics.hpp"

namespace glassbox {

void MergeConfig::validate() const {
  if (neighbor_k < 1) throw UsageError("neighbor_k must be >= 1");
  if (!std::isfinite(distance_threshold)) throw UsageError("distance_threshold must be finite");
  if (threshold_grid_size < 1) throw UsageError("threshold_grid_size must be >= 1");
}

bool ConnectivityGraph::connected(std::size_t a, std::size_t b) const {
  const Edge e{std::min(a, b), std::max(a, b)};
  return std::binary_search(edges.begin(), edges.end(), e);
}

double llm_distance(const LocalLinearModel& a, const LocalLinearModel& b) {
  if (a.w_eff.size() != b.w_eff.size()) throw UsageError("coefficient lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.w_eff.size(); ++i) {
    const double d = a.w_eff[i] - b.w_eff[i];
    s += d * d;
  }
  const double db = a.b_eff - b.b_eff;
  return std::sqrt(s + db * db);
}

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<double> mean_theta(const std::vector<std::size_t>& members,
                               const std::vector<ForwardResult>& forward) {
  std::vector<double> c(forward.empty() ? 0 : forward.front().pooled.theta.size(), 0.0);
  for (const auto id : members) {
    const auto& t = forward.at(id).pooled.theta;
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += t[j];
  }
  if (!members.empty()) {
    for (auto& v : c) v /= static_cast<double>(members.size());
  }
  return c;
}

std::vector<std::size_t> cluster_members(const Cluster& cluster,
                                         const std::vector<LocalLinearModel>& regions) {
  std::vector<std::size_t> out;
  for (const auto r : cluster) {
    const auto& m = regions.at(r).member_ids;
    out.insert(out.end(), m.begin(), m.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<std::vector<double>> region_centroids(const std::vector<LocalLinearModel>& regions,
                                                  const std::vector<ForwardResult>& forward) {
  std::vector<std::vector<double>> out;
  out.reserve(regions.size());
  for (const auto& r : regions) out.push_back(mean_theta(r.member_ids, forward));
  return out;
}

ConnectivityGraph connectivity_graph(const std::vector<std::vector<double>>& centroids,
                                     std::size_t neighbor_k) {
  if (neighbor_k < 1) throw UsageError("neighbor_k must be >= 1");
  const std::size_t n = centroids.size();
  std::set<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.emplace_back(euclidean(centroids[i], centroids[j]), j);
    }
    std::sort(others.begin(), others.end());
    const std::size_t take = std::min(neighbor_k, others.size());
    for (std::size_t t = 0; t < take; ++t) {
      const std::size_t j = others[t].second;
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  return {n, std::vector<Edge>(edges.begin(), edges.end())};
}

ConnectivityGraph connectivity_graph(const std::vector<LocalLinearModel>& regions,
                                     const std::vector<ForwardResult>& forward,
                                     std::size_t neighbor_k) {
  return connectivity_graph(region_centroids(regions, forward), neighbor_k);
}

std::vector<Cluster> agglomerative_merge(const std::vector<LocalLinearModel>& regions,
                                         const ConnectivityGraph& graph,
                                         double distance_threshold) {
  const std::size_t n = regions.size();
  if (graph.node_count != n) throw UsageError("graph does not match the regions");

  // Slot i holds the cluster whose smallest region id is i; sum[i][j] is the
  // total pairwise distance between the clusters in slots i and j.
  std::vector<Cluster> slots(n);
  std::vector<bool> alive(n, true);
  std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    slots[i] = {i};
    for (std::size_t j = i + 1; j < n; ++j) {
      sum[i][j] = sum[j][i] = llm_distance(regions[i], regions[j]);
    }
  }
  for (const auto& e : graph.edges) linked[e.a][e.b] = linked[e.b][e.a] = true;

  while (true) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = n, bb = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!alive[b] || !linked[a][b]) continue;
        const double linkage =
            sum[a][b] / static_cast<double>(slots[a].size() * slots[b].size());
        if (linkage < best) {
          best = linkage;
          ba = a;
          bb = b;
        }
      }
    }
    if (ba == n || best > distance_threshold) break;

    slots[ba].insert(slots[ba].end(), slots[bb].begin(), slots[bb].end());
    std::sort(slots[ba].begin(), slots[ba].end());
    slots[bb].clear();
    alive[bb] = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (!alive[c] || c == ba) continue;
      sum[ba][c] = sum[c][ba] = sum[ba][c] + sum[bb][c];
      linked[ba][c] = linked[c][ba] = linked[ba][c] || linked[bb][c];
    }
  }

  std::vector<Cluster> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) out.push_back(slots[i]);
  }
  return out;
}

std::vector<Cluster> absorb_small_regions(std::vector<Cluster> clusters,
                                          const std::vector<LocalLinearModel>& regions,
                                          const std::vector<ForwardResult>& forward,
                                          std::size_t min_region_size) {
  auto size_of = [&](const Cluster& c) {
    std::size_t s = 0;
    for (const auto r : c) s += regions.at(r).member_ids.size();
    return s;
  };
  while (clusters.size() > 1) {
    std::size_t small = clusters.size();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      const auto s = size_of(clusters[i]);
      if (s < min_region_size && (small == clusters.size() || s < size_of(clusters[small]))) {
        small = i;
      }
    }
    if (small == clusters.size()) break;

    bool any_large = false;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (i != small && size_of(clusters[i]) >= min_region_size) any_large = true;
    }
    const auto centroid = mean_theta(cluster_members(clusters[small], regions), forward);
    std::size_t target = clusters.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (i == small || (any_large && size_of(clusters[i]) < min_region_size)) continue;
      const double d =
          euclidean(centroid, mean_theta(cluster_members(clusters[i], regions), forward));
      if (d < best) {
        best = d;
        target = i;
      }
    }
    auto& dst = clusters[target];
    dst.insert(dst.end(), clusters[small].begin(), clusters[small].end());
    std::sort(dst.begin(), dst.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(small));
  }
  std::sort(clusters.begin(), clusters.end());
  return clusters;
}

double logistic_loss(std::span<const double> w, double b, std::span<const std::size_t> members,
                     const std::vector<ForwardResult>& forward, std::span<const int> labels) {
  double loss = 0.0;
  for (const auto id : members) {
    const double eta = dot(w, forward[id].pooled.theta) + b;
    loss += std::max(eta, 0.0) - labels[id] * eta + std::log1p(std::exp(-std::abs(eta)));
  }
  return loss / static_cast<double>(members.size());
}

namespace {

// Gradient descent with Armijo backtracking on the mean logistic loss.
void fit_logistic(std::vector<double>& w, double& b, std::span<const std::size_t> members,
                  const std::vector<ForwardResult>& forward, std::span<const int> labels,
                  std::size_t iterations) {
  const double inv = 1.0 / static_cast<double>(members.size());
  double step = 1.0;
  double loss = logistic_loss(w, b, members, forward, labels);
  std::vector<double> gw(w.size());
  std::vector<double> trial_w(w.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (const auto id : members) {
      const auto& theta = forward[id].pooled.theta;
      const double r = (predict_proba(dot(w, theta) + b) - labels[id]) * inv;
      for (std::size_t j = 0; j < w.size(); ++j) gw[j] += r * theta[j];
      gb += r;
    }
    const double gnorm2 = dot(gw, gw) + gb * gb;
    if (gnorm2 < 1e-20) break;
    step *= 2.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t j = 0; j < w.size(); ++j) trial_w[j] = w[j] - step * gw[j];
      const double trial_b = b - step * gb;
      const double trial = logistic_loss(trial_w, trial_b, members, forward, labels);
      if (trial <= loss - 0.5 * step * gnorm2) {
        w = trial_w;
        b = trial_b;
        loss = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
}

}  // namespace

std::vector<MergedRegion> refit_regions(const std::vector<Cluster>& clusters,
                                        const std::vector<LocalLinearModel>& regions,
                                        const std::vector<ForwardResult>& forward,
                                        std::span<const int> labels,
                                        std::size_t refit_iterations) {
  std::vector<MergedRegion> out;
  for (const auto& cluster : clusters) {
    if (cluster.empty()) throw UsageError("empty cluster");
    MergedRegion mr;
    mr.source_region_ids = cluster;
    mr.member_ids = cluster_members(cluster, regions);
    if (mr.member_ids.empty()) throw UsageError("cluster has no members");
    const std::size_t h = regions.at(cluster.front()).w_eff.size();
    mr.refit_w.assign(h, 0.0);
    double total = 0.0;
    for (const auto r : cluster) {
      const auto& llm = regions[r];
      mr.source_patterns.push_back(llm.pattern);
      const auto weight = static_cast<double>(llm.member_ids.size());
      for (std::size_t j = 0; j < h; ++j) mr.refit_w[j] += weight * llm.w_eff[j];
      mr.refit_b += weight * llm.b_eff;
      total += weight;
    }
    for (auto& v : mr.refit_w) v /= total;
    mr.refit_b /= total;

    std::size_t positives = 0;
    for (const auto id : mr.member_ids) positives += labels[id] == 1;
    mr.refit_skipped = positives == 0 || positives == mr.member_ids.size();
    if (!mr.refit_skipped) {
      fit_logistic(mr.refit_w, mr.refit_b, mr.member_ids, forward, labels, refit_iterations);
    }
    mr.centroid = mean_theta(mr.member_ids, forward);
    mr.stats = region_stats(mr.refit_w, mr.refit_b, mr.member_ids, forward, labels);
    out.push_back(std::move(mr));
  }
  return out;
}

std::size_t MergedModel::assign(const ForwardResult& fr) const {
  if (regions.empty()) throw UsageError("merged model has no regions");
  if (const auto it = assignment.find(pattern_from_hidden(fr.hidden_pre)); it != assignment.end()) {
    return it->second;
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const double d = euclidean(fr.pooled.theta, regions[i].centroid);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double MergedModel::predict(const ForwardResult& fr) const {
  const auto& r = regions[assign(fr)];
  return predict_proba(dot(r.refit_w, fr.pooled.theta) + r.refit_b);
}

double merged_predict(const MergedModel& merged, const TextCnnModel& model,
                      std::span<const TokenId> ids) {
  return merged.predict(forward(model, ids));
}

MergedModel merge_regions(const std::vector<LocalLinearModel>& regions,
                          const std::vector<ForwardResult>& forward, std::span<const int> labels,
                          const MergeConfig& cfg, double distance_threshold) {
  cfg.validate();
  if (regions.empty()) throw UsageError("no regions to merge");
  const auto graph = connectivity_graph(regions, forward, cfg.neighbor_k);
  auto clusters = agglomerative_merge(regions, graph, distance_threshold);
  std::size_t min_size = cfg.min_region_size;
  if (min_size == 0) {
    min_size = std::max<std::size_t>(
        30, static_cast<std::size_t>(std::ceil(0.001 * static_cast<double>(forward.size()))));
  }
  clusters = absorb_small_regions(std::move(clusters), regions, forward, min_size);

  MergedModel merged;
  merged.distance_threshold = distance_threshold;
  merged.regions = refit_regions(clusters, regions, forward, labels, cfg.refit_iterations);
  for (std::size_t c = 0; c < merged.regions.size(); ++c) {
    for (const auto& p : merged.regions[c].source_patterns) merged.assignment[p] = c;
  }
  return merged;
}

std::vector<double> threshold_grid(const std::vector<LocalLinearModel>& regions,
                                   std::size_t points) {
  std::vector<double> grid = {0.0};
  std::vector<double> d;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) d.push_back(llm_distance(regions[i], regions[j]));
  }
  if (d.empty() || points < 2) return grid;
  std::sort(d.begin(), d.end());
  for (std::size_t q = 1; q < points; ++q) {
    const auto idx = static_cast<std::size_t>(std::llround(
        static_cast<double>(q) / static_cast<double>(points - 1) * static_cast<double>(d.size() - 1)));
    grid.push_back(d[idx]);
  }
  return grid;
}

MergeSelection merge_with_validation(const TextCnnModel& model, const Dataset& train,
                                     const Dataset& val, const MergeConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) throw UsageError("merge needs nonempty train and validation sets");
  const auto fwd_train = forward_all(model, train);
  const auto train_labels = train.labels();
  const auto regions = enumerate_regions(model, fwd_train);
  const auto fwd_val = forward_all(model, val);
  const auto val_labels = val.labels();

  MergeSelection sel;
  sel.unmerged_val_accuracy = accuracy(scores_of(fwd_val), val_labels);
  if (cfg.distance_threshold >= 0.0) {
    sel.merged = merge_regions(regions, fwd_train, train_labels, cfg, cfg.distance_threshold);
    std::vector<double> s;
    for (const auto& fr : fwd_val) s.push_back(sel.merged.predict(fr));
    sel.grid.emplace_back(cfg.distance_threshold, accuracy(s, val_labels));
    return sel;
  }

  std::vector<MergedModel> candidates;
  for (const double t : threshold_grid(regions, cfg.threshold_grid_size)) {
    auto merged = merge_regions(regions, fwd_train, train_labels, cfg, t);
    std::vector<double> s;
    s.reserve(fwd_val.size());
    for (const auto& fr : fwd_val) s.push_back(merged.predict(fr));
    sel.grid.emplace_back(t, accuracy(s, val_labels));
    candidates.push_back(std::move(merged));
  }
  std::size_t chosen = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (sel.grid[i].second >= sel.unmerged_val_accuracy - cfg.selection_tolerance) chosen = i;
  }
  if (chosen == candidates.size()) {
    chosen = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (sel.grid[i].second >= sel.grid[chosen].second) chosen = i;
    }
  }
  sel.merged = std::move(candidates[chosen]);
  return sel;
}

std::string merge_report_csv(const MergedModel& merged) {
  std::ostringstream os;
  os << "cluster_id,source_region_ids,count,refit_skipped,local_accuracy,local_auc,"
        "global_accuracy,global_auc\n";
  for (std::size_t c = 0; c < merged.regions.size(); ++c) {
    const auto& r = merged.regions[c];
    os << c + 1 << ',';
    for (std::size_t i = 0; i < r.source_region_ids.size(); ++i) {
      os << (i ? " " : "") << r.source_region_ids[i] + 1;
    }
    os << ',' << r.stats.count << ',' << (r.refit_skipped ? 1 : 0) << ','
       << format_stat(r.stats.local_accuracy) << ',' << format_stat(r.stats.local_auc) << ','
       << format_stat(r.stats.global_accuracy) << ',' << format_stat(r.stats.global_auc) << '\n';
  }
  return os.str();
}

namespace {

std::string reals_json(std::span<const double> values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += format_real(values[i]);
  }
  return s + "]";
}

}  // namespace

std::string merged_to_string(const MergedModel& merged) {
  std::ostringstream os;
  os << "{\n\"format\":\"glassbox-merged\",\n\"version\":1,\n\"distance_threshold\":"
     << format_real(merged.distance_threshold) << ",\n\"regions\":[";
  for (std::size_t c = 0; c < merged.regions.size(); ++c) {
    const auto& r = merged.regions[c];
    std::vector<std::string> patterns;
    for (const auto& p : r.source_patterns) patterns.push_back(p.to_string());
    os << (c ? ",\n" : "\n") << "{\"source_region_ids\":" << nlohmann::json(r.source_region_ids).dump()
       << ",\"source_patterns\":" << nlohmann::json(patterns).dump()
       << ",\"count\":" << r.stats.count
       << ",\"refit_skipped\":" << (r.refit_skipped ? "true" : "false")
       << ",\"refit_w\":" << reals_json(r.refit_w) << ",\"refit_b\":" << format_real(r.refit_b)
       << ",\"centroid\":" << reals_json(r.centroid) << '}';
  }
  os << "\n]\n}\n";
  return os.str();
}

MergedModel merged_from_string(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "glassbox-merged") throw DataError("not a merged-model file");
    MergedModel merged;
    merged.distance_threshold = j.at("distance_threshold").get<double>();
    for (const auto& rj : j.at("regions")) {
      MergedRegion r;
      r.source_region_ids = rj.at("source_region_ids").get<std::vector<std::size_t>>();
      for (const auto& p : rj.at("source_patterns")) {
        r.source_patterns.push_back(ActivationPattern::from_string(p.get<std::string>()));
      }
      r.refit_skipped = rj.at("refit_skipped").get<bool>();
      r.refit_w = rj.at("refit_w").get<std::vector<double>>();
      r.refit_b = rj.at("refit_b").get<double>();
      r.centroid = rj.at("centroid").get<std::vector<double>>();
      r.stats.count = rj.at("count").get<std::size_t>();
      if (r.centroid.size() != r.refit_w.size()) throw DataError("centroid length mismatch");
      const auto c = merged.regions.size();
      for (const auto& p : r.source_patterns) merged.assignment[p] = c;
      merged.regions.push_back(std::move(r));
    }
    if (merged.regions.empty()) throw DataError("merged model has no regions");
    return merged;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed merged model: ") + e.what());
  }
}

void save_merged(const std::filesystem::path& path, const MergedModel& merged) {
  write_file(path, merged_to_string(merged));
}

MergedModel load_merged(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("merged model not found: " + path.string());
  return merged_from_string(read_file(path));
}

}  // namespace glassbox
