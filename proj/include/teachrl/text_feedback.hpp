#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "teachrl/world.hpp"

namespace teachrl::text {

/// One typed instruction. Text is never blank.
class Utterance {
 public:
  /// Throws std::invalid_argument when `text` is empty after trimming.
  explicit Utterance(std::string text, double timestamp = 0.0);

  const std::string& text() const { return text_; }
  double timestamp() const { return timestamp_; }

 private:
  std::string text_;
  double timestamp_;
};

/// Lowercased word tokens; apostrophes stay inside words ("don't").
std::vector<std::string> tokenize(std::string_view text);

/// The last of "up", "down", "left", "right" in the utterance, any case.
std::optional<world::MoveAction> parse_advice(const Utterance& utterance);
std::optional<world::MoveAction> parse_advice(std::string_view text);

class LexiconError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Phrase sets are stored as space-joined lowercase tokens.
struct SentimentLexicon {
  std::set<std::string> positive;
  std::set<std::string> negative;
  std::set<std::string> negation;

  /// `+phrase`, `-phrase`, `!token`, one per line; `#` starts a comment.
  static SentimentLexicon parse(std::string_view text);
  static SentimentLexicon load(const std::string& path);
  /// The lexicon shipped in data/lexicon.txt, compiled in.
  static const SentimentLexicon& builtin();
};

enum class Sentiment { Positive, Negative, Neutral };
std::string_view sentiment_name(Sentiment s);

struct LexiconHit {
  std::string phrase;
  std::size_t token_index = 0;
  int polarity = 0;  // after negation
  bool negated = false;
};

struct CritiqueVerdict {
  Sentiment sentiment = Sentiment::Neutral;
  int score = 0;
  std::vector<LexiconHit> hits;
};

/// Sums +1/-1 per matched phrase (longest match first), flipping a phrase
/// when a negation token sits within the two words before it.
CritiqueVerdict classify_critique(const Utterance& utterance, const SentimentLexicon& lexicon);

}  // namespace teachrl::text
