#include "glassbox/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "glassbox/checkpoint.hpp"
#include "glassbox/error.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/parallel.hpp"
#include "glassbox/random.hpp"
#include "glassbox/unwrapper.hpp"

namespace glassbox {

L1Placement l1_placement_from_string(const std::string& s) {
  if (s == "none") return L1Placement::kNone;
  if (s == "input_to_hidden") return L1Placement::kInputToHidden;
  if (s == "hidden_to_output") return L1Placement::kHiddenToOutput;
  throw UsageError("unknown l1_placement '" + s +
                   "' (expected none, input_to_hidden or hidden_to_output)");
}

std::string to_string(L1Placement p) {
  switch (p) {
    case L1Placement::kNone:
      return "none";
    case L1Placement::kInputToHidden:
      return "input_to_hidden";
    case L1Placement::kHiddenToOutput:
      return "hidden_to_output";
  }
  return "none";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning_rate must be positive");
  }
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be nonnegative");
}

Gradients Gradients::zeros_like(const TextCnnModel& model) {
  Gradients g;
  g.embedding = Matrix(model.embedding.weights.rows, model.embedding.weights.cols);
  for (const auto& f : model.filters) g.filter_weights.emplace_back(f.weights.rows, f.weights.cols);
  g.filter_bias.assign(model.filters.size(), 0.0);
  g.w1 = Matrix(model.classifier.w1.rows, model.classifier.w1.cols);
  g.b1.assign(model.classifier.b1.size(), 0.0);
  g.w2.assign(model.classifier.w2.size(), 0.0);
  return g;
}

namespace {

// log(1 + exp(eta)) - y * eta without overflow.
double bce_with_logit(double eta, int label) {
  return std::max(eta, 0.0) - static_cast<double>(label) * eta + std::log1p(std::exp(-std::abs(eta)));
}

double sign(double w) { return (w > 0.0) - (w < 0.0); }

const std::vector<double>* penalized(const ClassifierMlp& mlp, L1Placement p) {
  switch (p) {
    case L1Placement::kInputToHidden:
      return &mlp.w1.data;
    case L1Placement::kHiddenToOutput:
      return &mlp.w2;
    case L1Placement::kNone:
      break;
  }
  return nullptr;
}

double l1_term(const ClassifierMlp& mlp, const TrainConfig& cfg) {
  const auto* w = penalized(mlp, cfg.l1_placement);
  if (w == nullptr || cfg.lambda == 0.0 || w->empty()) return 0.0;
  double s = 0.0;
  for (const double v : *w) s += std::abs(v);
  return cfg.lambda * s / static_cast<double>(w->size());
}

std::vector<const TokenizedDocument*> pointers(const Dataset& ds) {
  std::vector<const TokenizedDocument*> out;
  out.reserve(ds.size());
  for (const auto& d : ds.documents) out.push_back(&d);
  return out;
}

}  // namespace

LossAndGradients loss_and_gradients(const TextCnnModel& model,
                                    std::span<const TokenizedDocument* const> batch,
                                    const TrainConfig& cfg) {
  if (batch.empty()) throw UsageError("empty batch");
  const std::size_t count = batch.size();
  std::vector<ForwardResult> fwd(count);
  parallel_for(count, [&](std::size_t i) { fwd[i] = forward(model, batch[i]->ids); });

  LossAndGradients out;
  out.gradients = Gradients::zeros_like(model);
  auto& g = out.gradients;
  const auto& mlp = model.classifier;
  const std::size_t k = mlp.b1.size();
  const std::size_t h = model.filters.size();
  const std::size_t m = model.embedding.weights.cols;
  const double inv_n = 1.0 / static_cast<double>(count);

  std::vector<double> dz(k);
  std::vector<double> dtheta(h);
  double loss = 0.0;
  // Sequential reduction in batch order keeps results independent of threads.
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = fwd[i];
    const auto& doc = *batch[i];
    loss += bce_with_logit(r.eta, doc.label);
    const double deta = (predict_proba(r.eta) - static_cast<double>(doc.label)) * inv_n;

    g.b2 += deta;
    for (std::size_t u = 0; u < k; ++u) {
      const bool active = r.hidden_pre[u] > 0.0;
      g.w2[u] += active ? deta * r.hidden_pre[u] : 0.0;
      dz[u] = active ? deta * mlp.w2[u] : 0.0;
      g.b1[u] += dz[u];
    }
    std::fill(dtheta.begin(), dtheta.end(), 0.0);
    for (std::size_t u = 0; u < k; ++u) {
      if (dz[u] == 0.0) continue;
      auto gw1 = g.w1.row(u);
      const auto w1 = mlp.w1.row(u);
      for (std::size_t j = 0; j < h; ++j) {
        gw1[j] += dz[u] * r.pooled.theta[j];
        dtheta[j] += dz[u] * w1[j];
      }
    }
    for (std::size_t j = 0; j < h; ++j) {
      const auto& window = r.pooled.window[j];
      if (!window || dtheta[j] == 0.0) continue;
      const auto& filter = model.filters[j];
      auto& gf = g.filter_weights[j];
      g.filter_bias[j] += dtheta[j];
      for (std::size_t row = 0; row < filter.width; ++row) {
        const auto id = static_cast<std::size_t>(doc.ids[*window + row]);
        const auto emb_row = model.embedding.weights.row(id);
        const auto w_row = filter.weights.row(row);
        auto gf_row = gf.row(row);
        for (std::size_t c = 0; c < m; ++c) gf_row[c] += dtheta[j] * emb_row[c];
        if (id == static_cast<std::size_t>(kPadId)) continue;
        auto ge_row = g.embedding.row(id);
        for (std::size_t c = 0; c < m; ++c) ge_row[c] += dtheta[j] * w_row[c];
      }
    }
  }
  loss *= inv_n;

  if (const auto* w = penalized(mlp, cfg.l1_placement); w != nullptr && cfg.lambda != 0.0) {
    loss += l1_term(mlp, cfg);
    const double scale = cfg.lambda / static_cast<double>(w->size());
    auto& gw = cfg.l1_placement == L1Placement::kInputToHidden ? g.w1.data : g.w2;
    for (std::size_t t = 0; t < w->size(); ++t) gw[t] += scale * sign((*w)[t]);
  }
  if (!std::isfinite(loss)) throw DataError("loss is not finite");
  out.loss = loss;
  return out;
}

LossAndGradients loss_and_gradients(const TextCnnModel& model, const Dataset& batch,
                                    const TrainConfig& cfg) {
  const auto ptrs = pointers(batch);
  return loss_and_gradients(model, ptrs, cfg);
}

double batch_loss(const TextCnnModel& model, const Dataset& batch, const TrainConfig& cfg) {
  if (batch.empty()) throw UsageError("empty batch");
  double loss = 0.0;
  for (const auto& doc : batch.documents) loss += bce_with_logit(forward(model, doc.ids).eta, doc.label);
  return loss / static_cast<double>(batch.size()) + l1_term(model.classifier, cfg);
}

namespace {

std::vector<std::span<double>> parameter_spans(TextCnnModel& model) {
  std::vector<std::span<double>> out;
  out.emplace_back(model.embedding.weights.data);
  for (auto& f : model.filters) out.emplace_back(f.weights.data);
  for (auto& f : model.filters) out.emplace_back(&f.bias, 1);
  out.emplace_back(model.classifier.w1.data);
  out.emplace_back(model.classifier.b1);
  out.emplace_back(model.classifier.w2);
  out.emplace_back(&model.classifier.b2, 1);
  return out;
}

std::vector<std::span<const double>> gradient_spans(const Gradients& g) {
  std::vector<std::span<const double>> out;
  out.emplace_back(g.embedding.data);
  for (const auto& f : g.filter_weights) out.emplace_back(f.data);
  for (const auto& b : g.filter_bias) out.emplace_back(&b, 1);
  out.emplace_back(g.w1.data);
  out.emplace_back(g.b1);
  out.emplace_back(g.w2);
  out.emplace_back(&g.b2, 1);
  return out;
}

// Adam with an orthant-wise treatment of the L1 term on one parameter block:
// at w = 0 the minimum-norm subgradient is used, and a step may not cross
// zero (it stops there instead), so the penalty produces exact zeros.
class Adam {
 public:
  Adam(TextCnnModel& model, double lr) : lr_(lr) {
    for (const auto& s : parameter_spans(model)) {
      m_.emplace_back(s.size(), 0.0);
      v_.emplace_back(s.size(), 0.0);
    }
  }

  void set_l1(std::size_t block, double strength) {
    l1_block_ = block;
    l1_ = strength;
  }

  void step(TextCnnModel& model, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    auto params = parameter_spans(model);
    const auto grads = gradient_spans(g);
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& m = m_[p];
      auto& v = v_[p];
      const bool l1 = p == l1_block_ && l1_ > 0.0;
      for (std::size_t i = 0; i < params[p].size(); ++i) {
        double& w = params[p][i];
        double gi = grads[p][i];
        double orthant = 0.0;
        if (l1) {
          if (w == 0.0) {
            // gradient carries no L1 part at 0; pick the smallest subgradient
            gi = std::abs(gi) <= l1_ ? 0.0 : gi - std::copysign(l1_, gi);
            orthant = -gi;
          } else {
            orthant = w;
          }
        }
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
        const double next = w - lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
        w = l1 && next * orthant <= 0.0 ? 0.0 : next;
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  std::size_t l1_block_ = 0;
  double l1_ = 0.0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

std::size_t distinct_patterns(const std::vector<ForwardResult>& fwd) {
  std::set<ActivationPattern> patterns;
  for (const auto& r : fwd) patterns.insert(pattern_from_hidden(r.hidden_pre));
  return patterns.size();
}

}  // namespace

FitResult fit(const TextCnnModel& initial, const Dataset& train, const Dataset& val,
              const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty() || val.empty()) throw UsageError("training and validation sets must be nonempty");

  TextCnnModel model = initial;
  Adam adam(model, cfg.learning_rate);
  if (cfg.lambda > 0.0 && cfg.l1_placement != L1Placement::kNone) {
    // block order follows parameter_spans
    const std::size_t f = model.filters.size();
    const bool w1 = cfg.l1_placement == L1Placement::kInputToHidden;
    const double count = static_cast<double>(w1 ? model.classifier.w1.data.size()
                                                : model.classifier.w2.size());
    adam.set_l1(w1 ? 1 + 2 * f : 3 + 2 * f, cfg.lambda / count);
  }
  Rng rng(cfg.seed);
  std::vector<const TokenizedDocument*> order = pointers(train);
  const auto val_labels = val.labels();

  FitResult result;
  result.model = model;
  double best_acc = -1.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const TokenizedDocument* const> batch(order.data() + start, end - start);
      LossAndGradients lg;
      try {
        lg = loss_and_gradients(model, batch, cfg);
      } catch (const DataError& e) {
        throw DataError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += lg.loss * static_cast<double>(batch.size());
      adam.step(model, lg.gradients);
    }

    const auto fwd = forward_all(model, val);
    const auto scores = scores_of(fwd);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_accuracy = accuracy(scores, val_labels);
    rec.val_auc = auc(scores, val_labels);
    rec.region_count = distinct_patterns(fwd);
    result.history.epochs.push_back(rec);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      result.model = model;
      result.history.best_epoch = epoch;
    }
  }
  return result;
}

std::string history_to_csv(const TrainHistory& history) {
  std::ostringstream os;
  os << "epoch,train_loss,val_accuracy,val_auc,region_count,best\n";
  for (const auto& e : history.epochs) {
    os << e.epoch << ',' << format_real(e.train_loss) << ',' << format_real(e.val_accuracy) << ','
       << (e.val_auc ? format_real(*e.val_auc) : "N/A") << ',' << e.region_count << ','
       << (e.epoch == history.best_epoch ? 1 : 0) << '\n';
  }
  return os.str();
}

namespace {

SweepCell train_cell(const ModelConfig& model_cfg, const TrainConfig& cfg, const SplitData& data) {
  if (data.vocab_size < 2) throw UsageError("SplitData.vocab_size must be set");
  const auto fitted = fit(init_model(model_cfg, data.vocab_size), data.train, data.validation, cfg);
  SweepCell cell;
  cell.filters_per_size = model_cfg.filters_per_size;
  cell.hidden_units = model_cfg.hidden_units;
  cell.lambda = cfg.lambda;
  const auto& best = fitted.history.epochs[fitted.history.best_epoch];
  cell.val_accuracy = best.val_accuracy;
  const auto fwd = forward_all(fitted.model, data.test);
  const auto scores = scores_of(fwd);
  const auto labels = data.test.labels();
  cell.accuracy = accuracy(scores, labels);
  cell.auc = auc(scores, labels);
  const auto regions = enumerate_regions(fitted.model, fwd);
  cell.region_count = regions.size();
  cell.effective_region_count = effective_region_count(regions);
  return cell;
}

}  // namespace

SweepResult sweep_complexity(std::span<const std::size_t> nf_values,
                             std::span<const std::size_t> nh_values, const ModelConfig& base,
                             const TrainConfig& cfg, const SplitData& data) {
  if (nf_values.empty() || nh_values.empty()) throw UsageError("sweep grids must be nonempty");
  SweepResult out;
  for (const auto nf : nf_values) {
    for (const auto nh : nh_values) {
      ModelConfig mc = base;
      mc.filters_per_size = nf;
      mc.hidden_units = nh;
      try {
        out.cells.push_back(train_cell(mc, cfg, data));
      } catch (const DataError& e) {
        throw DataError("sweep cell n_f=" + std::to_string(nf) + " n_h=" + std::to_string(nh) +
                        ": " + e.what());
      }
    }
  }
  return out;
}

SweepResult sweep_lambda(std::span<const double> lambda_values, L1Placement placement,
                         const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const SplitData& data) {
  if (lambda_values.empty()) throw UsageError("lambda grid must be nonempty");
  for (std::size_t i = 0; i < lambda_values.size(); ++i) {
    if (!(lambda_values[i] >= 0.0)) throw UsageError("lambda values must be nonnegative");
    if (i > 0 && lambda_values[i] < lambda_values[i - 1]) {
      throw UsageError("lambda values must be sorted ascending");
    }
  }
  SweepResult out;
  for (const double lambda : lambda_values) {
    TrainConfig tc = cfg;
    tc.lambda = lambda;
    tc.l1_placement = placement;
    try {
      out.cells.push_back(train_cell(model_cfg, tc, data));
    } catch (const DataError& e) {
      throw DataError("sweep cell lambda=" + format_real(lambda) + ": " + e.what());
    }
  }
  return out;
}

double select_lambda(const SweepResult& sweep, std::size_t max_regions) {
  if (sweep.cells.empty()) throw UsageError("empty sweep");
  const SweepCell* best = nullptr;
  for (const auto& c : sweep.cells) {
    if (c.region_count >= max_regions) continue;
    if (best == nullptr || c.val_accuracy > best->val_accuracy ||
        (c.val_accuracy == best->val_accuracy && c.lambda > best->lambda)) {
      best = &c;
    }
  }
  if (best != nullptr) return best->lambda;
  const SweepCell* fewest = &sweep.cells.front();
  for (const auto& c : sweep.cells) {
    if (c.region_count < fewest->region_count ||
        (c.region_count == fewest->region_count && c.lambda > fewest->lambda)) {
      fewest = &c;
    }
  }
  return fewest->lambda;
}

std::string sweep_to_csv(const SweepResult& sweep) {
  std::ostringstream os;
  os << "filters_per_size,hidden_units,lambda,val_accuracy,test_accuracy,test_auc,region_count,"
        "effective_region_count\n";
  for (const auto& c : sweep.cells) {
    os << c.filters_per_size << ',' << c.hidden_units << ',' << format_real(c.lambda) << ','
       << format_real(c.val_accuracy) << ',' << format_real(c.accuracy) << ','
       << (c.auc ? format_real(*c.auc) : "N/A") << ',' << c.region_count << ','
       << c.effective_region_count << '\n';
  }
  return os.str();
}

}  // namespace glassbox
