#include "glassbox/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kOovToken));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kOovToken) {
    throw DataError("vocabulary must start with <PAD> and <OOV>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw DataError("duplicate vocabulary token: " + tokens[i]);
    v.add(std::move(tokens[i]));
  }
  return v;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kOovId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id out of range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::add(std::string token) {
  if (const auto it = token_to_id_.find(token); it != token_to_id_.end()) return it->second;
  const auto id = static_cast<TokenId>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
  return id;
}

void Dataset::push_back(TokenizedDocument doc) {
  if (doc.label == 1) {
    ++positive_count;
  } else if (doc.label == 0) {
    ++negative_count;
  } else {
    throw DataError("label must be 0 or 1, got " + std::to_string(doc.label));
  }
  documents.push_back(std::move(doc));
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(documents.size());
  for (const auto& d : documents) out.push_back(d.label);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, int min_freq) {
  if (min_freq < 1) throw UsageError("min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : docs) {
    for (const auto& t : doc) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [tok, n] : counts) {
    if (n >= static_cast<std::size_t>(min_freq) && tok != kPadToken && tok != kOovToken) {
      ranked.emplace_back(tok, n);
    }
  }
  // counts is already lexicographic, so a stable sort by count suffices.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (auto& [tok, n] : ranked) vocab.add(std::move(tok));
  return vocab;
}

std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                            std::size_t max_len) {
  if (max_len < 1) throw UsageError("max_len must be >= 1");
  std::vector<TokenId> ids(max_len, kPadId);
  const std::size_t n = std::min(max_len, tokens.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id_of(tokens[i]);
  return ids;
}

TokenizedDocument make_document(std::string_view text, int label, const Vocabulary& vocab,
                                std::size_t max_len) {
  TokenizedDocument doc;
  doc.tokens = tokenize(text);
  doc.ids = encode(doc.tokens, vocab, max_len);
  doc.label = label;
  return doc;
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".csv") return CorpusFormat::kCsv;
  if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::kJsonl;
  throw UsageError("cannot infer corpus format from " + path.string() + " (use csv or jsonl)");
}

namespace {

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

int parse_label(const std::string& field, const std::filesystem::path& path, std::size_t line) {
  std::string s = field;
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError(location(path, line) + ": label must be 0 or 1, got '" + field + "'");
}

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180: fields separated by commas, optionally quoted, "" escapes a quote,
// quoted fields may span lines.
std::vector<CsvRecord> parse_csv(const std::string& text, const std::filesystem::path& path) {
  std::vector<CsvRecord> records;
  CsvRecord rec;
  std::string field;
  std::size_t line = 1;
  rec.line = 1;
  bool in_quotes = false;
  bool field_started = false;
  bool was_quoted = false;
  auto end_field = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(rec.fields.size() == 1 && rec.fields[0].empty())) records.push_back(std::move(rec));
    rec = CsvRecord{};
    rec.line = line;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (field_started || was_quoted) {
        throw DataError(location(path, line) + ": malformed quoted field");
      }
      in_quotes = true;
      was_quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // tolerated before \n
    } else if (c == '\n') {
      ++line;
      end_record();
    } else {
      if (was_quoted) throw DataError(location(path, line) + ": text after closing quote");
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError(location(path, rec.line) + ": unterminated quoted field");
  end_record();
  return records;
}

std::vector<LabeledText> read_csv(const std::string& text, const std::filesystem::path& path) {
  auto records = parse_csv(text, path);
  if (records.empty()) throw DataError(path.string() + ": missing header");
  const auto& header = records.front().fields;
  std::size_t text_col = header.size();
  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = header[i];
    if (i == 0 && h.rfind("\xEF\xBB\xBF", 0) == 0) h = h.substr(3);
    if (h == "text") text_col = i;
    if (h == "label") label_col = i;
  }
  if (text_col == header.size() || label_col == header.size()) {
    throw DataError(location(path, 1) + ": header must contain text and label columns");
  }
  std::vector<LabeledText> out;
  out.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw DataError(location(path, rec.line) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(rec.fields.size()));
    }
    out.push_back({rec.fields[text_col], parse_label(rec.fields[label_col], path, rec.line)});
  }
  return out;
}

std::vector<LabeledText> read_jsonl(const std::string& text, const std::filesystem::path& path) {
  std::vector<LabeledText> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(location(path, lineno) + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(location(path, lineno) + ": expected a JSON object");
    if (!j.contains("text") || !j["text"].is_string()) {
      throw DataError(location(path, lineno) + ": missing string field 'text'");
    }
    if (!j.contains("label")) throw DataError(location(path, lineno) + ": missing field 'label'");
    const auto& label = j["label"];
    int value = -1;
    if (label.is_number_integer()) {
      value = label.get<int>();
    } else if (label.is_number_float() && (label.get<double>() == 0.0 || label.get<double>() == 1.0)) {
      value = static_cast<int>(label.get<double>());
    }
    if (value != 0 && value != 1) {
      throw DataError(location(path, lineno) + ": label must be 0 or 1, got " + label.dump());
    }
    out.push_back({j["text"].get<std::string>(), value});
  }
  return out;
}

}  // namespace

std::vector<LabeledText> read_labeled_text(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return format == CorpusFormat::kCsv ? read_csv(buf.str(), path) : read_jsonl(buf.str(), path);
}

Dataset make_dataset(const std::vector<LabeledText>& records, const Vocabulary& vocab,
                     std::size_t max_len) {
  Dataset ds;
  ds.documents.reserve(records.size());
  for (const auto& r : records) ds.push_back(make_document(r.text, r.label, vocab, max_len));
  return ds;
}

Dataset load_corpus(const std::filesystem::path& path, CorpusFormat format, const Vocabulary& vocab,
                    std::size_t max_len) {
  return make_dataset(read_labeled_text(path, format), vocab, max_len);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double train_fraction,
                                                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train_fraction must be in (0, 1)");
  }
  if (n < 2) throw DataError("cannot split a dataset with fewer than 2 documents");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  auto first = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  first = std::clamp<std::size_t>(first, 1, n - 1);
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(first), order.end());
  return {std::move(a), std::move(b)};
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed) {
  const auto [ia, ib] = split_indices(ds.size(), train_fraction, seed);
  Dataset a;
  Dataset b;
  for (const auto i : ia) a.push_back(ds.documents[i]);
  for (const auto i : ib) b.push_back(ds.documents[i]);
  return {std::move(a), std::move(b)};
}

}  // namespace glassbox
