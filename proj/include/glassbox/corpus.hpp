#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace glassbox {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kOovId = 1;
inline constexpr std::string_view kPadToken = "<PAD>";
inline constexpr std::string_view kOovToken = "<OOV>";

class Vocabulary {
 public:
  // Only the two reserved entries.
  Vocabulary();

  // Rebuilds a vocabulary from tokens in id order. The first two entries must
  // be the reserved <PAD> and <OOV> literals and the rest must be unique.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return id_to_token_.size(); }
  TokenId id_of(std::string_view token) const;  // kOovId when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // Appends a new token; returns its id, or the existing id if present.
  TokenId add(std::string token);

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct TokenizedDocument {
  std::vector<TokenId> ids;         // exactly max_len entries
  std::vector<std::string> tokens;  // original tokens, before padding/truncation
  int label = 0;                    // 0 or 1
};

struct Dataset {
  std::vector<TokenizedDocument> documents;
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
  void push_back(TokenizedDocument doc);
  std::vector<int> labels() const;
};

struct LabeledText {
  std::string text;
  int label = 0;
};

enum class CorpusFormat { kCsv, kJsonl };

// Lowercase, split on whitespace, and emit every ASCII punctuation character
// as its own token.
std::vector<std::string> tokenize(std::string_view text);

// <PAD>=0, <OOV>=1, then tokens with frequency >= min_freq by descending
// frequency, ties broken lexicographically.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, int min_freq);

// Unknown tokens map to <OOV>; the head of the sequence is kept and the tail
// is right-padded with <PAD>.
std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                            std::size_t max_len);

TokenizedDocument make_document(std::string_view text, int label, const Vocabulary& vocab,
                                std::size_t max_len);

CorpusFormat format_from_path(const std::filesystem::path& path);

// Reads `text,label` CSV (RFC 4180 quoting, header required) or JSONL with
// keys `text` and `label`. Errors name the offending line.
std::vector<LabeledText> read_labeled_text(const std::filesystem::path& path, CorpusFormat format);

Dataset make_dataset(const std::vector<LabeledText>& records, const Vocabulary& vocab,
                     std::size_t max_len);

Dataset load_corpus(const std::filesystem::path& path, CorpusFormat format, const Vocabulary& vocab,
                    std::size_t max_len);

// Deterministic shuffle under seed, then the first round(n * train_fraction)
// documents form the first part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed);

// Same partition as split_dataset, expressed as indices into ds.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double train_fraction,
                                                                            std::uint64_t seed);

}  // namespace glassbox
