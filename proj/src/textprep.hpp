#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpus.hpp"

namespace edre::textprep {

enum class PosTag : uint8_t { Noun = 0, Verb = 1, Adj = 2, Other = 3 };

const char* to_string(PosTag tag);

struct LemmaRule {
  std::string suffix;
  std::string replacement;
  bool has_tag_filter = false;
  PosTag tag_filter = PosTag::Noun;
};

struct PrepConfig {
  bool lowercase = true;
  bool keep_contractions = true;
  std::set<std::string> stopwords;       // defaults() fills from the bundled list
  std::vector<int> ngram_orders = {1, 2, 3};
  std::vector<LemmaRule> lemma_rules;    // defaults() fills from the bundled table

  static PrepConfig defaults();
  void validate() const;  // ngram_orders nonempty, every order >= 1
};

// Token/n-gram representation of one review. `features` is the union of
// n-grams over the configured orders (ascending), n-gram terms joined by a
// single space.
struct TokenDoc {
  std::string review_id;
  std::vector<std::string> lemmas;
  std::vector<std::string> features;
};

// Splits on punctuation, keeping apostrophes that sit inside alphabetic
// contractions. Non-ASCII bytes pass through as token characters.
std::vector<std::string> tokenize(std::string_view text, const PrepConfig& config);

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const PrepConfig& config);

// Coarse rule-based tagging: closed-class word lists plus suffix rules.
// Tags exist to steer the lemmatizer's rule selection, nothing else.
std::vector<std::pair<std::string, PosTag>> pos_tag(const std::vector<std::string>& tokens);

std::vector<std::string> lemmatize(const std::vector<std::pair<std::string, PosTag>>& tagged,
                                   const PrepConfig& config);
std::string lemmatize_token(const std::string& token, PosTag tag, const PrepConfig& config);

std::vector<std::string> extract_ngrams(const std::vector<std::string>& lemmas,
                                        const std::vector<int>& orders);

// tokenize -> remove_stopwords -> pos_tag -> lemmatize -> extract_ngrams.
TokenDoc preprocess(const corpus::ReviewComment& comment, const PrepConfig& config);
TokenDoc preprocess_text(const std::string& review_id, const std::string& body, const PrepConfig& config);

// Stop list file: one lowercase word per line, '#' comments allowed.
std::set<std::string> parse_stopword_list(const std::string& content);
std::set<std::string> load_stopword_file(const std::filesystem::path& path);

// Lemma rule file: ordered `suffix -> replacement [tag-filter]` lines.
std::vector<LemmaRule> parse_lemma_rules(const std::string& content);
std::vector<LemmaRule> load_lemma_rule_file(const std::filesystem::path& path);

const std::string& builtin_stopword_text();
const std::string& builtin_lemma_rule_text();

}  // namespace edre::textprep
