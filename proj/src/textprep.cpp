#include "textprep.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "error.hpp"
#include "util.hpp"

namespace edre::textprep {

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

// Token characters: ASCII alphanumerics and any non-ASCII byte. Everything
// else separates tokens, apart from contraction apostrophes.
bool is_token_char(char c) {
  return is_ascii_alpha(c) || is_ascii_digit(c) || static_cast<unsigned char>(c) >= 0x80;
}

const std::unordered_set<std::string>& closed_class_words() {
  static const std::unordered_set<std::string> words = {
      // determiners, pronouns, prepositions, conjunctions, particles
      "the", "a", "an", "this", "that", "these", "those", "some", "any", "each", "every",
      "i", "you", "he", "she", "it", "we", "they", "me", "him", "them", "us",
      "my", "your", "his", "its", "our", "their", "mine", "yours",
      "of", "in", "on", "at", "by", "for", "with", "from", "to", "into", "onto", "over",
      "under", "about", "after", "before", "between", "through", "during", "against",
      "and", "or", "but", "if", "else", "nor", "so", "yet", "as", "than", "because",
      "while", "until", "unless", "since", "although", "though", "when", "where", "how",
      "why", "what", "which", "who", "whom", "whose", "not", "no", "yes", "here", "there",
      "up", "down", "out", "off", "again", "then", "once", "too", "also", "very", "just",
      "don't", "doesn't", "didn't", "won't", "can't", "isn't", "aren't", "wasn't",
      "i'll", "i'd", "i've", "it's", "that's", "let's",
  };
  return words;
}

const std::unordered_set<std::string>& verb_words() {
  static const std::unordered_set<std::string> words = {
      // auxiliaries and copulas (kept as verbs so noun rules skip them)
      "is", "are", "was", "were", "be", "been", "being", "am",
      "do", "does", "did", "doing", "have", "has", "had", "having",
      "can", "could", "should", "would", "will", "shall", "may", "might", "must",
      // verbs common in review comments
      "fix", "use", "make", "add", "remove", "rename", "change", "move", "update",
      "check", "test", "call", "return", "maintain", "refactor", "merge", "commit",
      "revert", "extract", "implement", "handle", "avoid", "ensure", "consider",
      "rewrite", "split", "inline", "delete", "create", "drop", "keep", "prefer",
      "clean", "improve", "simplify", "validate", "verify", "document", "deprecate",
      "replace", "reduce", "apply", "pass", "fail", "throw", "catch", "log", "run",
  };
  return words;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

const char* to_string(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Verb: return "VERB";
    case PosTag::Adj: return "ADJ";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

PrepConfig PrepConfig::defaults() {
  PrepConfig config;
  config.stopwords = parse_stopword_list(builtin_stopword_text());
  config.lemma_rules = parse_lemma_rules(builtin_lemma_rule_text());
  return config;
}

void PrepConfig::validate() const {
  if (ngram_orders.empty()) raise(ErrorClass::Invalid, "ngram_orders must be nonempty");
  for (int n : ngram_orders) {
    if (n < 1) raise(ErrorClass::Invalid, "ngram order must be >= 1, got " + std::to_string(n));
  }
}

std::vector<std::string> tokenize(std::string_view text, const PrepConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (is_token_char(c)) {
      if (config.lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      current.push_back(c);
    } else if (c == '\'' && config.keep_contractions && i > 0 && i + 1 < text.size() &&
               is_ascii_alpha(text[i - 1]) && is_ascii_alpha(text[i + 1])) {
      current.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const PrepConfig& config) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (!config.stopwords.count(token)) out.push_back(token);
  }
  return out;
}

std::vector<std::pair<std::string, PosTag>> pos_tag(const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::string, PosTag>> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) {
    PosTag tag = PosTag::Noun;
    if (closed_class_words().count(token)) {
      tag = PosTag::Other;
    } else if (verb_words().count(token)) {
      tag = PosTag::Verb;
    } else if (ends_with(token, "ly")) {
      tag = PosTag::Other;  // adverb bucket
    } else if (ends_with(token, "ing")) {
      tag = PosTag::Noun;  // gerunds kept nominal; see lemma rule filters
    } else if (ends_with(token, "ed")) {
      tag = PosTag::Verb;
    } else if (ends_with(token, "ous") || ends_with(token, "ful") || ends_with(token, "able") ||
               ends_with(token, "ible") || ends_with(token, "ive") || ends_with(token, "less") ||
               ends_with(token, "ish")) {
      tag = PosTag::Adj;
    }
    out.emplace_back(token, tag);
  }
  return out;
}

std::string lemmatize_token(const std::string& token, PosTag tag, const PrepConfig& config) {
  // Each pass applies the first matching rule, then rescans the rewritten
  // token, so chains like plural + agentive ("buffers" -> "buffer" ->
  // "buff") land on a fixed point in one call. Identity rules stop the
  // scan; the pass cap bounds cyclic user tables.
  std::string current = token;
  for (int pass = 0; pass < 16; ++pass) {
    std::string next = current;
    for (const auto& rule : config.lemma_rules) {
      if (rule.has_tag_filter && rule.tag_filter != tag) continue;
      if (!ends_with(current, rule.suffix)) continue;
      std::string candidate =
          current.substr(0, current.size() - rule.suffix.size()) + rule.replacement;
      if (candidate.size() < 2) continue;
      next = std::move(candidate);
      break;
    }
    if (next == current) return current;
    current = std::move(next);
  }
  return current;
}

std::vector<std::string> lemmatize(const std::vector<std::pair<std::string, PosTag>>& tagged,
                                   const PrepConfig& config) {
  std::vector<std::string> out;
  out.reserve(tagged.size());
  for (const auto& [token, tag] : tagged) out.push_back(lemmatize_token(token, tag, config));
  return out;
}

std::vector<std::string> extract_ngrams(const std::vector<std::string>& lemmas,
                                        const std::vector<int>& orders) {
  std::vector<int> sorted_orders(orders);
  std::sort(sorted_orders.begin(), sorted_orders.end());
  sorted_orders.erase(std::unique(sorted_orders.begin(), sorted_orders.end()), sorted_orders.end());

  std::vector<std::string> features;
  for (int n : sorted_orders) {
    if (n < 1) raise(ErrorClass::Invalid, "ngram order must be >= 1");
    if (static_cast<size_t>(n) > lemmas.size()) continue;
    for (size_t start = 0; start + static_cast<size_t>(n) <= lemmas.size(); ++start) {
      std::string gram = lemmas[start];
      for (size_t j = 1; j < static_cast<size_t>(n); ++j) {
        gram += ' ';
        gram += lemmas[start + j];
      }
      features.push_back(std::move(gram));
    }
  }
  return features;
}

TokenDoc preprocess_text(const std::string& review_id, const std::string& body, const PrepConfig& config) {
  config.validate();
  TokenDoc doc;
  doc.review_id = review_id;
  auto tokens = tokenize(body, config);
  auto kept = remove_stopwords(tokens, config);
  auto tagged = pos_tag(kept);
  doc.lemmas = lemmatize(tagged, config);
  doc.features = extract_ngrams(doc.lemmas, config.ngram_orders);
  return doc;
}

TokenDoc preprocess(const corpus::ReviewComment& comment, const PrepConfig& config) {
  return preprocess_text(comment.id, comment.body, config);
}

std::set<std::string> parse_stopword_list(const std::string& content) {
  std::set<std::string> words;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string word = trim(line);
    if (!word.empty()) words.insert(to_lower_ascii(word));
  }
  return words;
}

std::set<std::string> load_stopword_file(const std::filesystem::path& path) {
  return parse_stopword_list(read_file(path));
}

std::vector<LemmaRule> parse_lemma_rules(const std::string& content) {
  std::vector<LemmaRule> rules;
  std::istringstream in(content);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string text = trim(line);
    if (text.empty()) continue;
    auto arrow = text.find("->");
    if (arrow == std::string::npos) {
      raise(ErrorClass::Parse, "lemma rules line " + std::to_string(lineno) + ": missing \"->\"");
    }
    LemmaRule rule;
    rule.suffix = trim(text.substr(0, arrow));
    std::string rhs = trim(text.substr(arrow + 2));
    if (!rhs.empty() && rhs.back() == ']') {
      auto open = rhs.rfind('[');
      if (open == std::string::npos) {
        raise(ErrorClass::Parse, "lemma rules line " + std::to_string(lineno) + ": unbalanced tag filter");
      }
      std::string tag = trim(rhs.substr(open + 1, rhs.size() - open - 2));
      rhs = trim(rhs.substr(0, open));
      rule.has_tag_filter = true;
      if (tag == "NOUN") rule.tag_filter = PosTag::Noun;
      else if (tag == "VERB") rule.tag_filter = PosTag::Verb;
      else if (tag == "ADJ") rule.tag_filter = PosTag::Adj;
      else if (tag == "OTHER") rule.tag_filter = PosTag::Other;
      else raise(ErrorClass::Parse, "lemma rules line " + std::to_string(lineno) + ": unknown tag \"" + tag + "\"");
    }
    rule.replacement = rhs;
    if (rule.suffix.empty()) {
      raise(ErrorClass::Parse, "lemma rules line " + std::to_string(lineno) + ": empty suffix");
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<LemmaRule> load_lemma_rule_file(const std::filesystem::path& path) {
  return parse_lemma_rules(read_file(path));
}

}  // namespace edre::textprep
