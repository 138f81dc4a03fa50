#include "glassbox/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "glassbox/error.hpp"

namespace glassbox {

std::string format_real(double v) {
  if (!std::isfinite(v)) throw DataError("cannot serialize non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // Keep integral values recognizable as reals.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("failed writing " + path.string());
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"filters_per_size", c.filters_per_size},
          {"filter_widths", kFilterWidths},
          {"hidden_units", c.hidden_units},
          {"max_len", c.max_len},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.filters_per_size = j.value("filters_per_size", c.filters_per_size);
  c.hidden_units = j.value("hidden_units", c.hidden_units);
  c.max_len = j.value("max_len", c.max_len);
  c.seed = j.value("seed", c.seed);
  if (j.contains("filter_widths") &&
      j["filter_widths"].get<std::vector<std::size_t>>() !=
          std::vector<std::size_t>(kFilterWidths.begin(), kFilterWidths.end())) {
    throw DataError("only filter widths [1, 2, 3] are supported");
  }
  return c;
}

namespace {

void write_reals(std::ostringstream& os, std::span<const double> values) {
  os << '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << format_real(values[i]);
  }
  os << ']';
}

std::vector<double> reals(const nlohmann::json& j, std::size_t expected, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != expected) {
    throw DataError(std::string("checkpoint field ") + what + " has " + std::to_string(v.size()) +
                    " values, expected " + std::to_string(expected));
  }
  return v;
}

}  // namespace

std::string checkpoint_to_string(const TextCnnModel& model, const Vocabulary& vocab) {
  if (vocab.size() != model.vocab_size()) throw DataError("vocabulary and embedding sizes differ");
  std::ostringstream os;
  os << "{\n\"format\":\"glassbox-checkpoint\",\n\"version\":1,\n";
  os << "\"config\":" << model_config_to_json(model.config).dump() << ",\n";
  os << "\"vocab\":" << nlohmann::json(vocab.tokens()).dump() << ",\n";
  os << "\"embedding\":[";
  for (std::size_t r = 0; r < model.embedding.weights.rows; ++r) {
    os << (r ? ",\n" : "\n");
    write_reals(os, model.embedding.weights.row(r));
  }
  os << "],\n\"filters\":[";
  for (std::size_t j = 0; j < model.filters.size(); ++j) {
    const auto& f = model.filters[j];
    os << (j ? ",\n" : "\n") << "{\"width\":" << f.width << ",\"weights\":";
    write_reals(os, f.weights.data);
    os << ",\"bias\":" << format_real(f.bias) << '}';
  }
  const auto& c = model.classifier;
  os << "],\n\"classifier\":{\n\"W1\":";
  write_reals(os, c.w1.data);
  os << ",\n\"b1\":";
  write_reals(os, c.b1);
  os << ",\n\"W2\":";
  write_reals(os, c.w2);
  os << ",\n\"b2\":" << format_real(c.b2) << "\n}\n}\n";
  return os.str();
}

Checkpoint checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    Checkpoint cp;
    cp.vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    auto& model = cp.model;
    model.config = model_config_from_json(j.at("config"));
    model.config.validate();
    const std::size_t m = model.config.embed_dim;
    const std::size_t nf = model.config.filters_per_size;
    const std::size_t h = model.config.filter_count();
    const std::size_t k = model.config.hidden_units;

    const auto& rows = j.at("embedding");
    if (rows.size() != cp.vocab.size()) throw DataError("embedding rows differ from vocabulary");
    model.embedding.weights = Matrix(rows.size(), m);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = reals(rows[r], m, "embedding");
      std::copy(row.begin(), row.end(), model.embedding.weights.row(r).begin());
    }

    const auto& filters = j.at("filters");
    if (filters.size() != h) throw DataError("checkpoint filter count differs from config");
    for (std::size_t idx = 0; idx < h; ++idx) {
      const auto& fj = filters[idx];
      ConvFilter f;
      f.width = fj.at("width").get<std::size_t>();
      if (f.width != kFilterWidths[idx / nf]) throw DataError("filters are not grouped by width");
      f.weights = Matrix(f.width, m);
      f.weights.data = reals(fj.at("weights"), f.width * m, "filter weights");
      f.bias = fj.at("bias").get<double>();
      model.filters.push_back(std::move(f));
    }

    const auto& cj = j.at("classifier");
    auto& c = model.classifier;
    c.w1 = Matrix(k, h);
    c.w1.data = reals(cj.at("W1"), k * h, "W1");
    c.b1 = reals(cj.at("b1"), k, "b1");
    c.w2 = reals(cj.at("W2"), k, "W2");
    c.b2 = cj.at("b2").get<double>();
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TextCnnModel& model,
                     const Vocabulary& vocab) {
  write_file(path, checkpoint_to_string(model, vocab));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path.string());
  return checkpoint_from_string(read_file(path));
}

}  // namespace glassbox
