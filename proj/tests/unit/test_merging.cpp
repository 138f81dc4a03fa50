#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "glassbox/error.hpp"
#include "glassbox/merging.hpp"
#include "test_support.hpp"

using namespace glassbox;

namespace {

LocalLinearModel llm(std::vector<double> w, double b, std::vector<std::size_t> members = {},
                     std::string pattern = "0") {
  LocalLinearModel m;
  m.w_eff = std::move(w);
  m.b_eff = b;
  m.member_ids = std::move(members);
  m.pattern = ActivationPattern::from_string(pattern);
  return m;
}

ForwardResult at(std::vector<double> theta, std::vector<double> hidden = {1.0}) {
  ForwardResult fr;
  fr.pooled.theta = std::move(theta);
  fr.pooled.window.assign(fr.pooled.theta.size(), std::nullopt);
  fr.hidden_pre = std::move(hidden);
  return fr;
}

ConnectivityGraph complete_graph(std::size_t n) {
  ConnectivityGraph g;
  g.node_count = n;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) g.edges.push_back({a, b});
  }
  return g;
}

}  // namespace

TEST_CASE("llm distance") {
  const auto a = llm({0.0, 0.0}, 0.0);
  const auto b = llm({3.0, 0.0}, 4.0);
  CHECK(llm_distance(a, b) == 5.0);
  CHECK(llm_distance(b, a) == 5.0);
  CHECK(llm_distance(a, a) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto x = llm({rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-1, 1));
    const auto y = llm({rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-1, 1));
    const auto z = llm({rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-1, 1));
    CHECK(llm_distance(x, y) == llm_distance(y, x));
    CHECK(llm_distance(x, z) <= llm_distance(x, y) + llm_distance(y, z) + 1e-12);
  }
  CHECK_THROWS_AS(llm_distance(a, llm({1.0}, 0.0)), UsageError);
}

TEST_CASE("knn connectivity graph") {
  const std::vector<std::vector<double>> c = {{0.0}, {1.0}, {10.0}};
  const auto g = connectivity_graph(c, 1);
  // 0 <-> 1 mutual, 2's nearest is 1
  CHECK(g.edges == std::vector<Edge>{{0, 1}, {1, 2}});
  CHECK(g.connected(1, 0));
  CHECK(!g.connected(0, 2));
  const auto full = connectivity_graph(c, 5);
  CHECK(full.edges.size() == 3);
  CHECK_THROWS_AS(connectivity_graph(c, 0), UsageError);
}

TEST_CASE("average linkage on three regions") {
  // pairwise distances: d01 = 1, d12 = 2, d02 = 3
  const std::vector<LocalLinearModel> regions = {llm({0.0}, 0.0, {0}), llm({1.0}, 0.0, {1}),
                                                 llm({3.0}, 0.0, {2})};
  const auto g = complete_graph(3);
  CHECK(agglomerative_merge(regions, g, 0.5) == std::vector<Cluster>{{0}, {1}, {2}});
  CHECK(agglomerative_merge(regions, g, 1.0) == std::vector<Cluster>{{0, 1}, {2}});
  // linkage({0,1},{2}) = (3 + 2) / 2 = 2.5
  CHECK(agglomerative_merge(regions, g, 2.49) == std::vector<Cluster>{{0, 1}, {2}});
  CHECK(agglomerative_merge(regions, g, 2.5) == std::vector<Cluster>{{0, 1, 2}});

  // without an edge 0-1 the closest allowed pair is 1-2
  ConnectivityGraph sparse;
  sparse.node_count = 3;
  sparse.edges = {{1, 2}};
  CHECK(agglomerative_merge(regions, sparse, 100.0) == std::vector<Cluster>{{0}, {1, 2}});
}

TEST_CASE("threshold zero only collapses identical models") {
  Rng rng(3);
  std::vector<LocalLinearModel> regions;
  for (std::size_t i = 0; i < 8; ++i) {
    regions.push_back(llm({rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-1, 1), {i}));
  }
  const auto g = complete_graph(8);
  CHECK(agglomerative_merge(regions, g, 0.0).size() == 8);

  regions.push_back(regions[2]);
  regions.back().member_ids = {8};
  const auto dup = agglomerative_merge(regions, complete_graph(9), 0.0);
  CHECK(dup.size() == 8);
  CHECK(std::find(dup.begin(), dup.end(), Cluster{2, 8}) != dup.end());
}

TEST_CASE("cluster count is monotone in the threshold") {
  Rng rng(4);
  std::vector<LocalLinearModel> regions;
  std::vector<std::vector<double>> centroids;
  for (std::size_t i = 0; i < 15; ++i) {
    regions.push_back(llm({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
                          rng.uniform(-2, 2), {i}));
    centroids.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
  }
  const auto g = connectivity_graph(centroids, 3);
  std::size_t previous = regions.size() + 1;
  for (double t = 0.0; t <= 8.0; t += 0.25) {
    const auto clusters = agglomerative_merge(regions, g, t);
    CHECK(clusters.size() <= previous);
    previous = clusters.size();
    std::set<std::size_t> seen;
    for (const auto& c : clusters) seen.insert(c.begin(), c.end());
    CHECK(seen.size() == regions.size());
  }
}

TEST_CASE("small clusters are absorbed by the nearest large one") {
  std::vector<ForwardResult> fwd;
  for (int i = 0; i < 5; ++i) fwd.push_back(at({0.0}));
  for (int i = 0; i < 5; ++i) fwd.push_back(at({10.0}));
  fwd.push_back(at({9.0}));
  fwd.push_back(at({1.0}));
  const std::vector<LocalLinearModel> regions = {
      llm({0.0}, 0.0, {0, 1, 2, 3, 4}), llm({0.0}, 0.0, {5, 6, 7, 8, 9}), llm({0.0}, 0.0, {10}),
      llm({0.0}, 0.0, {11})};
  const std::vector<Cluster> clusters = {{0}, {1}, {2}, {3}};
  CHECK(absorb_small_regions(clusters, regions, fwd, 3) == std::vector<Cluster>{{0, 3}, {1, 2}});
  CHECK(absorb_small_regions(clusters, regions, fwd, 1) == clusters);
  // nothing is large enough: everything collapses into one cluster
  CHECK(absorb_small_regions(clusters, regions, fwd, 100).size() == 1);
}

TEST_CASE("refit lowers the logistic loss and skips single-class clusters") {
  Rng rng(9);
  std::vector<ForwardResult> fwd;
  std::vector<int> labels;
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < 60; ++i) {
    const double x = rng.uniform(-2, 2);
    const double y = rng.uniform(-2, 2);
    fwd.push_back(at({x, y}));
    labels.push_back(x + 0.5 * y + rng.uniform(-0.5, 0.5) > 0 ? 1 : 0);
    members.push_back(i);
  }
  const std::vector<LocalLinearModel> regions = {llm({-1.0, 0.0}, 0.3, members)};
  const auto refit = refit_regions(std::vector<Cluster>{Cluster{0}}, regions, fwd, labels, 200);
  REQUIRE(refit.size() == 1);
  CHECK(!refit[0].refit_skipped);
  const double before = logistic_loss(regions[0].w_eff, regions[0].b_eff, members, fwd, labels);
  const double after = logistic_loss(refit[0].refit_w, refit[0].refit_b, members, fwd, labels);
  CHECK(after < before);
  CHECK(refit[0].refit_w[0] > 0.0);

  std::vector<int> ones(labels.size(), 1);
  const auto skipped = refit_regions(std::vector<Cluster>{Cluster{0}}, regions, fwd, ones, 200);
  CHECK(skipped[0].refit_skipped);
  CHECK(skipped[0].refit_w == regions[0].w_eff);
  CHECK(skipped[0].refit_b == regions[0].b_eff);
}

TEST_CASE("refit starts from member-weighted mean coefficients") {
  const std::vector<ForwardResult> fwd = {at({1.0}), at({1.0}), at({1.0}), at({1.0})};
  const std::vector<int> labels = {0, 0, 0, 0};
  const std::vector<LocalLinearModel> regions = {llm({1.0}, 1.0, {0, 1, 2}), llm({5.0}, -3.0, {3})};
  const auto r = refit_regions(std::vector<Cluster>{Cluster{0, 1}}, regions, fwd, labels, 50);
  CHECK(r[0].refit_skipped);
  CHECK(r[0].refit_w[0] == doctest::Approx(2.0));
  CHECK(r[0].refit_b == doctest::Approx(0.0));
  CHECK(r[0].member_ids == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("merged model on a real network") {
  Rng rng(21);
  const auto model = testing::random_model(4, 3, 5, 10, 30, 21, 1.0);
  const auto ds = testing::random_dataset(rng, 300, 10, 30);
  const auto fwd = forward_all(model, ds);
  const auto labels = ds.labels();
  const auto regions = enumerate_regions(model, fwd);
  MergeConfig cfg;
  cfg.min_region_size = 1;
  cfg.refit_iterations = 0;

  // Without merging or refitting, the merged model is the network itself.
  const auto identity = merge_regions(regions, fwd, labels, cfg, 0.0);
  CHECK(identity.regions.size() >= effective_region_count(regions));
  CHECK(identity.regions.size() <= regions.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(identity.predict(fwd[i]) == doctest::Approx(predict_proba(fwd[i].eta)).epsilon(1e-9));
    CHECK(merged_predict(identity, model, ds.documents[i].ids) == identity.predict(fwd[i]));
  }

  cfg.refit_iterations = 100;
  cfg.min_region_size = 30;
  const auto merged = merge_regions(regions, fwd, labels, cfg, 1.0);
  std::size_t total = 0;
  for (const auto& r : merged.regions) {
    total += r.member_ids.size();
    CHECK(r.member_ids.size() >= 30);
  }
  CHECK(total == ds.size());
  CHECK(merged.assignment.size() == regions.size());

  const auto text = merged_to_string(merged);
  const auto back = merged_from_string(text);
  CHECK(merged_to_string(back) == text);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.predict(fwd[i]) == merged.predict(fwd[i]));

  const auto dir = std::filesystem::temp_directory_path() / "glassbox_merge_test";
  save_merged(dir / "m.json", merged);
  CHECK(merged_to_string(load_merged(dir / "m.json")) == text);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_merged(dir / "missing.json"), DataError);
  CHECK_THROWS_AS(merged_from_string("{\"format\":\"other\"}"), DataError);
}

TEST_CASE("unseen patterns fall back to the nearest centroid") {
  MergedModel m;
  MergedRegion a;
  a.refit_w = {0.0};
  a.centroid = {0.0};
  MergedRegion b;
  b.refit_w = {0.0};
  b.refit_b = 2.0;
  b.centroid = {5.0};
  m.regions = {a, b};
  m.assignment[ActivationPattern::from_string("1")] = 0;
  CHECK(m.assign(at({4.0}, {1.0})) == 0);
  CHECK(m.assign(at({4.0}, {-1.0})) == 1);
  CHECK(m.predict(at({4.0}, {-1.0})) == doctest::Approx(predict_proba(2.0)));
}

TEST_CASE("threshold grid") {
  const std::vector<LocalLinearModel> regions = {llm({0.0}, 0.0), llm({1.0}, 0.0), llm({3.0}, 0.0)};
  const auto grid = threshold_grid(regions, 3);
  REQUIRE(!grid.empty());
  CHECK(grid.front() == 0.0);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(grid.back() <= 3.0);
  CHECK(threshold_grid({llm({0.0}, 0.0)}, 5) == std::vector<double>{0.0});
}
