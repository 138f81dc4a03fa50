#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "glassbox/corpus.hpp"

namespace glassbox {

struct SyntheticCorpusConfig {
  std::size_t documents = 2000;
  std::size_t min_tokens = 12;
  std::size_t max_tokens = 40;
  std::size_t min_phrases = 2;
  std::size_t max_phrases = 5;
  double off_polarity_rate = 0.3;  // chance a phrase disagrees with the label
  double negation_rate = 0.25;     // chance a phrase is "not <opposite word>"
  double label_noise = 0.03;
  std::uint64_t seed = 1;
};

// Review-like texts built from positive/negative lexicons, negations and
// neutral filler. Before label noise, the label is the majority polarity of
// the sentiment phrases in the text.
std::vector<LabeledText> synthetic_sentiment_corpus(const SyntheticCorpusConfig& cfg);

}  // namespace glassbox
