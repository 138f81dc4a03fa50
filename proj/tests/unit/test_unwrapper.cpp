#include <cmath>
#include <set>

#include "doctest.h"
#include "glassbox/metrics.hpp"
#include "glassbox/unwrapper.hpp"
#include "test_support.hpp"

using namespace glassbox;

namespace {

ClassifierMlp small_mlp() {
  ClassifierMlp mlp;
  mlp.w1 = Matrix(2, 2);
  mlp.w1(0, 0) = 1.0;
  mlp.w1(0, 1) = -1.0;
  mlp.w1(1, 0) = 2.0;
  mlp.w1(1, 1) = 0.5;
  mlp.b1 = {0.1, -0.3};
  mlp.w2 = {3.0, -2.0};
  mlp.b2 = 0.7;
  return mlp;
}

ForwardResult fake_forward(std::vector<double> theta, std::vector<double> hidden) {
  ForwardResult fr;
  fr.pooled.theta = std::move(theta);
  fr.pooled.window.assign(fr.pooled.theta.size(), std::nullopt);
  fr.hidden_pre = std::move(hidden);
  return fr;
}

}  // namespace

TEST_CASE("activation patterns") {
  CHECK(pattern_from_hidden(std::vector<double>{0.5, 0.0, -1.0, 2.0}).to_string() == "1001");
  CHECK(ActivationPattern::from_string("0110").bits == std::vector<bool>{false, true, true, false});
  CHECK_THROWS(ActivationPattern::from_string("01x"));
  const auto mlp = small_mlp();
  // theta (1, 1): hidden (0.1, 2.2)
  CHECK(activation_pattern(mlp, std::vector<double>{1.0, 1.0}).to_string() == "11");
  // theta (0, 0): hidden (0.1, -0.3)
  CHECK(activation_pattern(mlp, std::vector<double>{0.0, 0.0}).to_string() == "10");
}

TEST_CASE("extract_llm closed forms") {
  const auto mlp = small_mlp();
  const auto all = extract_llm(mlp, ActivationPattern::from_string("11"));
  CHECK(all.w[0] == doctest::Approx(3.0 * 1.0 - 2.0 * 2.0));
  CHECK(all.w[1] == doctest::Approx(3.0 * -1.0 - 2.0 * 0.5));
  CHECK(all.b == doctest::Approx(3.0 * 0.1 - 2.0 * -0.3 + 0.7));
  const auto none = extract_llm(mlp, ActivationPattern::from_string("00"));
  CHECK(none.w == std::vector<double>{0.0, 0.0});
  CHECK(none.b == 0.7);
  CHECK_THROWS(extract_llm(mlp, ActivationPattern::from_string("1")));
}

TEST_CASE("local linear model reproduces the network") {
  Rng rng(77);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = testing::random_model(4, 3, 6, 10, 30, seed, 1.0);
    const auto ds = testing::random_dataset(rng, 25, 10, 30);
    const auto fwd = forward_all(model, ds);
    for (const auto& fr : fwd) {
      const auto pattern = activation_pattern(model.classifier, fr.pooled.theta);
      CHECK(pattern == pattern_from_hidden(fr.hidden_pre));
      const auto llm = extract_llm(model.classifier, pattern);
      const double eta = dot(llm.w, fr.pooled.theta) + llm.b;
      CHECK(std::abs(eta - fr.eta) <= 1e-9 * std::max(1.0, std::abs(fr.eta)));
    }
  }
}

TEST_CASE("region enumeration partitions the dataset") {
  Rng rng(5);
  const auto model = testing::random_model(4, 3, 5, 10, 30, 9, 1.0);
  const auto ds = testing::random_dataset(rng, 200, 10, 30);
  const auto regions = enumerate_regions(model, ds);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    total += regions[r].member_ids.size();
    seen.insert(regions[r].member_ids.begin(), regions[r].member_ids.end());
    if (r > 0) CHECK(regions[r - 1].member_ids.size() >= regions[r].member_ids.size());
    for (std::size_t r2 = 0; r2 < r; ++r2) CHECK(regions[r].pattern != regions[r2].pattern);
  }
  CHECK(total == ds.documents.size());
  CHECK(seen.size() == ds.documents.size());
  CHECK(regions.size() <= std::min<std::size_t>(32, ds.documents.size()));
  CHECK(effective_region_count(regions) <= regions.size());
}

TEST_CASE("region count bounds") {
  Rng rng(6);
  auto model = testing::random_model(3, 2, 1, 6, 12, 3, 1.0);
  const auto ds = testing::random_dataset(rng, 100, 6, 12);
  CHECK(enumerate_regions(model, ds).size() <= 2);

  model.classifier.b1[0] = 10.0;  // hidden unit always on
  CHECK(enumerate_regions(model, ds).size() == 1);

  Dataset single;
  single.push_back(ds.documents[0]);
  const auto one = enumerate_regions(testing::random_model(3, 2, 4, 6, 12, 4), single);
  REQUIRE(one.size() == 1);
  CHECK(one[0].member_ids == std::vector<std::size_t>{0});
}

TEST_CASE("zero output weights make patterns degenerate") {
  Rng rng(7);
  auto model = testing::random_model(3, 2, 4, 8, 20, 11, 1.0);
  const auto ds = testing::random_dataset(rng, 150, 8, 20);
  const auto before = enumerate_regions(model, ds);
  model.classifier.w2[0] = 0.0;
  const auto after = enumerate_regions(model, ds);
  CHECK(after.size() == before.size());
  std::set<std::string> collapsed;
  for (const auto& r : after) {
    auto p = r.pattern;
    p.bits[0] = false;
    collapsed.insert(p.to_string());
  }
  CHECK(effective_region_count(after) <= collapsed.size());
}

TEST_CASE("region statistics") {
  // four members sharing theta-free scores: w = 0, b varies through theta
  std::vector<ForwardResult> fwd;
  const std::vector<double> etas = {std::log(9.0), std::log(4.0), std::log(0.25), std::log(1.0 / 9.0)};
  for (const double e : etas) fwd.push_back(fake_forward({e}, {1.0}));
  const std::vector<int> labels = {1, 1, 0, 0};
  const std::vector<double> w = {1.0};
  const std::vector<std::size_t> members = {0, 1, 2, 3};
  const auto s = region_stats(w, 0.0, members, fwd, labels);
  CHECK(s.count == 4);
  CHECK(s.response_mean == 0.5);
  CHECK(s.response_std == 0.5);
  REQUIRE(s.local_auc.has_value());
  CHECK(*s.local_auc == 1.0);
  CHECK(s.local_accuracy == 1.0);
  CHECK(s.local_f1 == 1.0);
  CHECK(*s.global_auc == 1.0);

  const std::vector<std::size_t> one = {2};
  const auto single = region_stats(w, 0.0, one, fwd, labels);
  CHECK(single.count == 1);
  CHECK(!single.local_auc.has_value());
  CHECK(single.response_std == 0.0);

  const std::vector<RegionStats> table = {s, single};
  const auto csv = region_table_csv(table);
  CHECK(csv.find("N/A") != std::string::npos);
  CHECK(csv.find("\n1,4,0.500000,0.500000,1.000000") != std::string::npos);
  CHECK(format_stat(std::optional<double>{}) == "N/A");
  CHECK(format_stat(0.983429) == "0.983429");
}

TEST_CASE("response std is the population std") {
  // mean 0.983429 gives std 0.127657 only under the population definition
  const double mean = 0.983429;
  CHECK(std::sqrt(mean * (1.0 - mean)) == doctest::Approx(0.127657).epsilon(1e-5));
}
