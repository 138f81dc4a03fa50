#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glassbox/model.hpp"
#include "glassbox/unwrapper.hpp"

namespace glassbox {

struct MergeConfig {
  // Negative means "select by validation accuracy".
  double distance_threshold = -1.0;
  // Zero means max(30, 0.1% of the dataset).
  std::size_t min_region_size = 0;
  std::size_t neighbor_k = 5;
  std::size_t refit_iterations = 200;
  std::size_t threshold_grid_size = 10;
  // Largest threshold whose validation accuracy stays within this much of the
  // unmerged network is selected.
  double selection_tolerance = 0.005;

  void validate() const;
};

using Cluster = std::vector<std::size_t>;  // region ids, ascending

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;  // a < b
  auto operator<=>(const Edge&) const = default;
};

struct ConnectivityGraph {
  std::size_t node_count = 0;
  std::vector<Edge> edges;  // sorted, unique

  bool connected(std::size_t a, std::size_t b) const;
};

// Euclidean norm of the difference of (w_eff, b_eff) concatenations.
double llm_distance(const LocalLinearModel& a, const LocalLinearModel& b);

// Mean theta over each region's members.
std::vector<std::vector<double>> region_centroids(const std::vector<LocalLinearModel>& regions,
                                                  const std::vector<ForwardResult>& forward);

// Undirected kNN graph between centroids: a-b is an edge when either is among
// the other's k nearest (ties by index).
ConnectivityGraph connectivity_graph(const std::vector<std::vector<double>>& centroids,
                                     std::size_t neighbor_k);
ConnectivityGraph connectivity_graph(const std::vector<LocalLinearModel>& regions,
                                     const std::vector<ForwardResult>& forward,
                                     std::size_t neighbor_k);

// Average-linkage agglomeration restricted to graph-connected cluster pairs.
// Stops once every connected pair has linkage above the threshold.
std::vector<Cluster> agglomerative_merge(const std::vector<LocalLinearModel>& regions,
                                         const ConnectivityGraph& graph,
                                         double distance_threshold);

// Merges every cluster smaller than min_region_size members into the nearest
// (member-weighted theta centroid) cluster that is large enough.
std::vector<Cluster> absorb_small_regions(std::vector<Cluster> clusters,
                                          const std::vector<LocalLinearModel>& regions,
                                          const std::vector<ForwardResult>& forward,
                                          std::size_t min_region_size);

struct MergedRegion {
  std::vector<std::size_t> source_region_ids;
  std::vector<ActivationPattern> source_patterns;
  std::vector<std::size_t> member_ids;
  std::vector<double> refit_w;
  double refit_b = 0.0;
  std::vector<double> centroid;  // mean theta over members
  bool refit_skipped = false;    // single-class members; weighted-mean coefficients kept
  RegionStats stats;
};

// Logistic regression per cluster on member thetas, started from the
// member-count-weighted mean of the source coefficients.
std::vector<MergedRegion> refit_regions(const std::vector<Cluster>& clusters,
                                        const std::vector<LocalLinearModel>& regions,
                                        const std::vector<ForwardResult>& forward,
                                        std::span<const int> labels,
                                        std::size_t refit_iterations);

// Mean BCE of sigmoid(w . theta + b) over the given members.
double logistic_loss(std::span<const double> w, double b, std::span<const std::size_t> members,
                     const std::vector<ForwardResult>& forward, std::span<const int> labels);

struct MergedModel {
  std::vector<MergedRegion> regions;
  std::map<ActivationPattern, std::size_t> assignment;  // original pattern -> merged index
  double distance_threshold = 0.0;

  std::size_t assign(const ForwardResult& fr) const;
  double predict(const ForwardResult& fr) const;
};

double merged_predict(const MergedModel& merged, const TextCnnModel& model,
                      std::span<const TokenId> ids);

// Full pipeline on a fixed threshold: graph, agglomeration, absorption, refit.
MergedModel merge_regions(const std::vector<LocalLinearModel>& regions,
                          const std::vector<ForwardResult>& forward, std::span<const int> labels,
                          const MergeConfig& cfg, double distance_threshold);

// 0 followed by evenly spaced quantiles of the pairwise LLM distances.
std::vector<double> threshold_grid(const std::vector<LocalLinearModel>& regions,
                                   std::size_t points);

struct MergeSelection {
  MergedModel merged;
  double unmerged_val_accuracy = 0.0;
  std::vector<std::pair<double, double>> grid;  // (threshold, validation accuracy)
};

// Merges regions observed on train; when cfg.distance_threshold is negative,
// picks the largest grid threshold whose validation accuracy is within
// cfg.selection_tolerance of the network, falling back to the best one.
MergeSelection merge_with_validation(const TextCnnModel& model, const Dataset& train,
                                     const Dataset& val, const MergeConfig& cfg);

std::string merge_report_csv(const MergedModel& merged);

std::string merged_to_string(const MergedModel& merged);
MergedModel merged_from_string(const std::string& text);
void save_merged(const std::filesystem::path& path, const MergedModel& merged);
MergedModel load_merged(const std::filesystem::path& path);

}  // namespace glassbox
