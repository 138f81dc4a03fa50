#include "glassbox/synthetic.hpp"

#include <array>
#include <string>
#include <string_view>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

namespace {

constexpr std::array<std::string_view, 32> kPositive = {
    "great",     "excellent", "amazing",  "delicious", "friendly",  "wonderful", "fantastic",
    "tasty",     "perfect",   "lovely",   "awesome",   "superb",    "fresh",     "best",
    "outstanding", "pleasant", "helpful", "cozy",      "flavorful", "generous",  "charming",
    "attentive", "impressive", "favorite", "enjoyable", "crispy",   "welcoming", "spotless",
    "brilliant", "affordable", "juicy",   "good"};

constexpr std::array<std::string_view, 32> kNegative = {
    "terrible",  "awful",      "rude",    "bland",     "disappointing", "horrible", "worst",
    "cold",      "slow",       "dirty",   "greasy",    "stale",     "overpriced", "mediocre",
    "tasteless", "soggy",      "noisy",   "unfriendly", "inedible", "burnt",      "nasty",
    "salty",     "careless",   "gross",   "sloppy",    "boring",    "unhelpful",  "chaotic",
    "dreadful",  "lukewarm",   "filthy",  "bad"};

constexpr std::array<std::string_view, 6> kPositivePhrases = {
    "highly recommended", "would come back", "will return", "loved it", "five stars",
    "worth every penny"};

constexpr std::array<std::string_view, 6> kNegativePhrases = {
    "never again", "waste of money", "stay away", "not worth it", "one star", "want a refund"};

constexpr std::array<std::string_view, 6> kIntensifiers = {"very", "really", "so", "extremely",
                                                           "truly", "quite"};

constexpr std::array<std::string_view, 72> kFiller = {
    "the",     "a",        "we",      "i",       "ordered", "food",     "place",   "service",
    "staff",   "menu",     "table",   "dinner",  "lunch",   "pizza",    "burger",  "salad",
    "chicken", "rice",     "coffee",  "drinks",  "waiter",  "came",     "went",    "was",
    "were",    "it",       "and",     "with",    "for",     "our",      "my",      "friends",
    "family",  "night",    "weekend", "price",   "portion", "dessert",  "bread",   "soup",
    "sauce",   "kitchen",  "seats",   "parking", "downtown", "restaurant", "visit", "time",
    "after",   "before",   "again",   "they",    "had",     "this",     "that",    "there",
    "also",    "then",     "order",   "meal",    "bar",     "patio",    "owner",   "line",
    "minutes", "hour",     "noodles", "tacos",   "steak",   "fries",    "tea",     "menu"};

std::string word(Rng& rng, bool positive) {
  return std::string(positive ? kPositive[rng.below(kPositive.size())]
                              : kNegative[rng.below(kNegative.size())]);
}

std::vector<std::string> phrase(Rng& rng, bool positive, double negation_rate) {
  const double r = rng.uniform();
  if (r < negation_rate) return {"not", word(rng, !positive)};
  if (r < negation_rate + 0.15) {
    const auto p = positive ? kPositivePhrases[rng.below(kPositivePhrases.size())]
                            : kNegativePhrases[rng.below(kNegativePhrases.size())];
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= p.size()) {
      const auto end = p.find(' ', start);
      out.emplace_back(p.substr(start, end == std::string_view::npos ? p.npos : end - start));
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    return out;
  }
  if (r < negation_rate + 0.40) {
    return {std::string(kIntensifiers[rng.below(kIntensifiers.size())]), word(rng, positive)};
  }
  return {word(rng, positive)};
}

}  // namespace

std::vector<LabeledText> synthetic_sentiment_corpus(const SyntheticCorpusConfig& cfg) {
  if (cfg.min_tokens > cfg.max_tokens || cfg.min_phrases > cfg.max_phrases || cfg.min_phrases < 1) {
    throw UsageError("invalid synthetic corpus ranges");
  }
  Rng rng(cfg.seed);
  std::vector<LabeledText> out;
  out.reserve(cfg.documents);
  for (std::size_t d = 0; d < cfg.documents; ++d) {
    const bool positive = rng.bernoulli(0.5);
    const std::size_t n_phrases = cfg.min_phrases + rng.below(cfg.max_phrases - cfg.min_phrases + 1);
    std::vector<bool> polarity(n_phrases);
    while (true) {
      std::size_t agree = 0;
      for (std::size_t p = 0; p < n_phrases; ++p) {
        polarity[p] = rng.bernoulli(cfg.off_polarity_rate) ? !positive : positive;
        agree += polarity[p] == positive;
      }
      if (2 * agree > n_phrases) break;
    }
    std::vector<std::vector<std::string>> phrases;
    std::size_t phrase_tokens = 0;
    for (const bool p : polarity) {
      phrases.push_back(phrase(rng, p, cfg.negation_rate));
      phrase_tokens += phrases.back().size();
    }
    const std::size_t length = cfg.min_tokens + rng.below(cfg.max_tokens - cfg.min_tokens + 1);
    const std::size_t fillers = length > phrase_tokens ? length - phrase_tokens : 0;

    // Interleave: each phrase goes into a random gap between filler words.
    std::vector<std::vector<std::string>> gaps(fillers + 1);
    for (auto& ph : phrases) {
      auto& gap = gaps[rng.below(gaps.size())];
      if (!gap.empty()) gap.emplace_back(rng.bernoulli(0.5) ? "," : "and");
      gap.insert(gap.end(), ph.begin(), ph.end());
    }
    std::string text;
    auto append = [&text](const std::string& t) {
      if (!text.empty() && t != "," && t != ".") text += ' ';
      text += t;
    };
    for (std::size_t i = 0; i <= fillers; ++i) {
      for (const auto& t : gaps[i]) append(t);
      if (i < fillers) {
        append(std::string(kFiller[rng.below(kFiller.size())]));
        if (rng.bernoulli(0.08)) append(".");
      }
    }
    if (rng.bernoulli(0.3)) text += positive ? "!" : ".";
    const bool flipped = rng.bernoulli(cfg.label_noise);
    out.push_back({std::move(text), (positive != flipped) ? 1 : 0});
  }
  return out;
}

}  // namespace glassbox
