#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "glassbox/corpus.hpp"
#include "glassbox/matrix.hpp"

namespace glassbox {

inline constexpr std::array<std::size_t, 3> kFilterWidths = {1, 2, 3};

struct ModelConfig {
  std::size_t embed_dim = 50;
  std::size_t filters_per_size = 10;
  std::size_t hidden_units = 10;
  std::size_t max_len = 800;
  std::uint64_t seed = 0;

  std::size_t filter_count() const { return kFilterWidths.size() * filters_per_size; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// vocab_size x embed_dim. Row 0 (<PAD>) stays zero.
struct EmbeddingTable {
  Matrix weights;
};

struct ConvFilter {
  std::size_t width = 1;
  Matrix weights;  // width x embed_dim
  double bias = 0.0;

  bool operator==(const ConvFilter&) const = default;
};

// Max-pooled filter responses. theta[j] >= 0; window[j] is the start of the
// earliest window attaining theta[j], or empty when every window was negative
// and the zero candidate won.
struct PooledFeatures {
  std::vector<double> theta;
  std::vector<std::optional<std::size_t>> window;
};

struct ClassifierMlp {
  Matrix w1;               // hidden x filters
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden (single output row)
  double b2 = 0.0;

  bool operator==(const ClassifierMlp&) const = default;
};

struct TextCnnModel {
  ModelConfig config;
  EmbeddingTable embedding;
  std::vector<ConvFilter> filters;  // grouped by width: n_f of width 1, then 2, then 3
  ClassifierMlp classifier;

  std::size_t vocab_size() const { return embedding.weights.rows; }
  std::size_t filter_count() const { return filters.size(); }
  std::size_t hidden_units() const { return classifier.b1.size(); }
};

struct ForwardResult {
  double eta = 0.0;  // pre-sigmoid score
  PooledFeatures pooled;
  std::vector<double> hidden_pre;  // W1 * theta + b1
};

TextCnnModel init_model(const ModelConfig& config, std::size_t vocab_size);

// l x m matrix of embedding rows.
Matrix embed(std::span<const TokenId> ids, const EmbeddingTable& table);

// Entry k is <w, emb[k..k+n-1]> + b.
std::vector<double> convolve(const ConvFilter& filter, const Matrix& emb);

struct PoolResult {
  double theta = 0.0;
  std::optional<std::size_t> window;
};

// max(0, max(values)); earliest index on ties, no window when all values < 0.
PoolResult max_pool(std::span<const double> values);

ForwardResult forward(const TextCnnModel& model, std::span<const TokenId> ids);

std::vector<double> hidden_pre_activation(const ClassifierMlp& mlp, std::span<const double> theta);
double classifier_eta(const ClassifierMlp& mlp, std::span<const double> hidden_pre);

double predict_proba(double eta);

// forward() over every document, in document order.
std::vector<ForwardResult> forward_all(const TextCnnModel& model, const Dataset& ds);

std::vector<double> scores_of(const std::vector<ForwardResult>& results);

}  // namespace glassbox
