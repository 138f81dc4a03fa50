#include "glassbox/model.hpp"

#include <cmath>
#include <string>

#include "glassbox/error.hpp"
#include "glassbox/parallel.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

void ModelConfig::validate() const {
  if (embed_dim < 1) throw UsageError("embed_dim must be >= 1");
  if (filters_per_size < 1) throw UsageError("filters_per_size must be >= 1");
  if (hidden_units < 1) throw UsageError("hidden_units must be >= 1");
  if (max_len < kFilterWidths.back()) {
    throw UsageError("max_len must be at least the widest filter (" +
                     std::to_string(kFilterWidths.back()) + ")");
  }
}

namespace {

void fill_glorot(Rng& rng, std::span<double> values, std::size_t fan_in, std::size_t fan_out) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : values) v = rng.uniform(-s, s);
}

}  // namespace

TextCnnModel init_model(const ModelConfig& config, std::size_t vocab_size) {
  config.validate();
  if (vocab_size < 2) throw UsageError("vocab_size must be >= 2");
  Rng rng(config.seed);
  TextCnnModel model;
  model.config = config;
  const std::size_t m = config.embed_dim;

  model.embedding.weights = Matrix(vocab_size, m);
  for (std::size_t r = 1; r < vocab_size; ++r) {
    for (auto& v : model.embedding.weights.row(r)) v = rng.uniform(-0.25, 0.25);
  }

  for (const std::size_t width : kFilterWidths) {
    for (std::size_t f = 0; f < config.filters_per_size; ++f) {
      ConvFilter filter;
      filter.width = width;
      filter.weights = Matrix(width, m);
      fill_glorot(rng, filter.weights.data, width * m, width * config.filters_per_size);
      model.filters.push_back(std::move(filter));
    }
  }

  const std::size_t h = config.filter_count();
  const std::size_t k = config.hidden_units;
  auto& mlp = model.classifier;
  mlp.w1 = Matrix(k, h);
  fill_glorot(rng, mlp.w1.data, h, k);
  mlp.b1.assign(k, 0.0);
  mlp.w2.assign(k, 0.0);
  fill_glorot(rng, mlp.w2, k, 1);
  mlp.b2 = 0.0;
  return model;
}

Matrix embed(std::span<const TokenId> ids, const EmbeddingTable& table) {
  const std::size_t m = table.weights.cols;
  Matrix out(ids.size(), m);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const TokenId id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= table.weights.rows) {
      throw DataError("token id " + std::to_string(id) + " outside embedding table of " +
                      std::to_string(table.weights.rows) + " rows");
    }
    const auto src = table.weights.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

std::vector<double> convolve(const ConvFilter& filter, const Matrix& emb) {
  const std::size_t n = filter.width;
  if (emb.rows < n) {
    throw DataError("sequence of length " + std::to_string(emb.rows) +
                    " is shorter than filter width " + std::to_string(n));
  }
  if (emb.cols != filter.weights.cols) throw DataError("filter and embedding widths differ");
  const std::size_t span = n * emb.cols;
  std::vector<double> out(emb.rows - n + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    // Rows k..k+n-1 are contiguous in row-major storage.
    const std::span<const double> window(emb.data.data() + k * emb.cols, span);
    out[k] = dot(filter.weights.data, window) + filter.bias;
  }
  return out;
}

PoolResult max_pool(std::span<const double> values) {
  PoolResult r;
  if (values.empty()) return r;
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  if (values[best] >= 0.0) {
    r.theta = values[best];
    r.window = best;
  }
  return r;
}

std::vector<double> hidden_pre_activation(const ClassifierMlp& mlp, std::span<const double> theta) {
  std::vector<double> z(mlp.b1.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = dot(mlp.w1.row(i), theta) + mlp.b1[i];
  return z;
}

double classifier_eta(const ClassifierMlp& mlp, std::span<const double> hidden_pre) {
  double eta = 0.0;
  for (std::size_t i = 0; i < hidden_pre.size(); ++i) {
    if (hidden_pre[i] > 0.0) eta += mlp.w2[i] * hidden_pre[i];
  }
  return eta + mlp.b2;
}

ForwardResult forward(const TextCnnModel& model, std::span<const TokenId> ids) {
  if (ids.size() != model.config.max_len) {
    throw DataError("document has " + std::to_string(ids.size()) + " ids, model expects " +
                    std::to_string(model.config.max_len));
  }
  const Matrix emb = embed(ids, model.embedding);
  ForwardResult r;
  r.pooled.theta.resize(model.filters.size());
  r.pooled.window.resize(model.filters.size());
  for (std::size_t j = 0; j < model.filters.size(); ++j) {
    const auto values = convolve(model.filters[j], emb);
    const auto pooled = max_pool(values);
    r.pooled.theta[j] = pooled.theta;
    r.pooled.window[j] = pooled.window;
  }
  r.hidden_pre = hidden_pre_activation(model.classifier, r.pooled.theta);
  r.eta = classifier_eta(model.classifier, r.hidden_pre);
  return r;
}

double predict_proba(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

std::vector<ForwardResult> forward_all(const TextCnnModel& model, const Dataset& ds) {
  std::vector<ForwardResult> out(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) { out[i] = forward(model, ds.documents[i].ids); });
  return out;
}

std::vector<double> scores_of(const std::vector<ForwardResult>& results) {
  std::vector<double> s;
  s.reserve(results.size());
  for (const auto& r : results) s.push_back(predict_proba(r.eta));
  return s;
}

}  // namespace glassbox
