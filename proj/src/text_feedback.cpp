#include "teachrl/text_feedback.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "teachrl/kv_config.hpp"

namespace teachrl::text {

std::string_view builtin_lexicon_text();

Utterance::Utterance(std::string text, double timestamp)
    : text_(std::move(text)), timestamp_(timestamp) {
  if (trim(text_).empty()) throw std::invalid_argument("utterance text is empty");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    // Quotes at the edges are punctuation, not part of the word.
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    if (!cur.empty()) tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::optional<world::MoveAction> parse_advice(std::string_view text) {
  std::optional<world::MoveAction> last;
  for (const auto& tok : tokenize(text)) {
    if (auto a = world::action_from_name(tok)) last = a;
  }
  return last;
}

std::optional<world::MoveAction> parse_advice(const Utterance& utterance) {
  return parse_advice(utterance.text());
}

namespace {

std::string normalize_phrase(std::string_view raw) {
  std::string joined;
  for (const auto& tok : tokenize(raw)) {
    if (!joined.empty()) joined.push_back(' ');
    joined += tok;
  }
  return joined;
}

}  // namespace

SentimentLexicon SentimentLexicon::parse(std::string_view text) {
  SentimentLexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const char kind = body.front();
    auto phrase = normalize_phrase(std::string_view(body).substr(1));
    if (phrase.empty()) throw LexiconError("lexicon line " + std::to_string(line_no) + ": empty entry");
    switch (kind) {
      case '+': lex.positive.insert(phrase); break;
      case '-': lex.negative.insert(phrase); break;
      case '!': lex.negation.insert(phrase); break;
      default:
        throw LexiconError("lexicon line " + std::to_string(line_no) + ": expected +, - or ! prefix");
    }
  }
  for (const auto& p : lex.positive) {
    if (lex.negative.count(p) || lex.negation.count(p)) {
      throw LexiconError("lexicon entry '" + p + "' appears in more than one set");
    }
  }
  for (const auto& n : lex.negative) {
    if (lex.negation.count(n)) throw LexiconError("lexicon entry '" + n + "' appears in more than one set");
  }
  return lex;
}

SentimentLexicon SentimentLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open lexicon file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const SentimentLexicon& SentimentLexicon::builtin() {
  static const SentimentLexicon lexicon = parse(builtin_lexicon_text());
  return lexicon;
}

std::string_view sentiment_name(Sentiment s) {
  switch (s) {
    case Sentiment::Positive: return "positive";
    case Sentiment::Negative: return "negative";
    case Sentiment::Neutral: return "neutral";
  }
  return "?";
}

CritiqueVerdict classify_critique(const Utterance& utterance, const SentimentLexicon& lexicon) {
  const auto tokens = tokenize(utterance.text());
  std::size_t longest = 1;
  for (const auto* set : {&lexicon.positive, &lexicon.negative}) {
    for (const auto& p : *set) {
      longest = std::max<std::size_t>(longest, 1 + static_cast<std::size_t>(std::count(p.begin(), p.end(), ' ')));
    }
  }

  CritiqueVerdict verdict;
  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t matched = 0;
    int polarity = 0;
    std::string phrase;
    for (std::size_t len = std::min(longest, tokens.size() - i); len >= 1 && !matched; --len) {
      std::string candidate = tokens[i];
      for (std::size_t k = 1; k < len; ++k) candidate += " " + tokens[i + k];
      if (lexicon.positive.count(candidate)) {
        polarity = 1;
      } else if (lexicon.negative.count(candidate)) {
        polarity = -1;
      } else {
        continue;
      }
      matched = len;
      phrase = std::move(candidate);
    }
    if (!matched) {
      ++i;
      continue;
    }
    bool negated = false;
    for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
      negated = negated || lexicon.negation.count(tokens[i - back]) > 0;
    }
    if (negated) polarity = -polarity;
    verdict.score += polarity;
    verdict.hits.push_back(LexiconHit{phrase, i, polarity, negated});
    i += matched;
  }
  verdict.sentiment = verdict.score > 0   ? Sentiment::Positive
                      : verdict.score < 0 ? Sentiment::Negative
                                          : Sentiment::Neutral;
  return verdict;
}

}  // namespace teachrl::text
