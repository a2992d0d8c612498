#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vuldat/corpus.hpp"

namespace vuldat::text {

enum class PreprocessMode { kPartial, kFull };

/// "partial" | "full". Throws ConfigError.
PreprocessMode parse_mode(std::string_view tag);
const char* to_string(PreprocessMode mode) noexcept;

struct CleanText {
  std::string text;
  PreprocessMode mode = PreprocessMode::kPartial;
  std::string source_id;

  bool operator==(const CleanText&) const = default;
};

/// Stop-word list plus lemma dictionary. Lemmas are themselves dictionary
/// entries, so a lemma maps to itself.
class Lexicon {
 public:
  /// The versioned lists shipped in data/ and compiled into the library.
  static const Lexicon& builtin();

  /// Parses stopwords.txt / lemma_table.tsv contents. '#' starts a comment
  /// line. Throws ConfigError on malformed rows.
  static Lexicon parse(std::string_view stopwords_txt, std::string_view lemma_tsv);
  static Lexicon load(const std::filesystem::path& stopwords,
                      const std::filesystem::path& lemma_table);

  bool is_stop_word(std::string_view token) const;

  /// Lemma for a known form, or nullptr.
  const std::string* lemma(std::string_view token) const;

  const std::unordered_set<std::string>& stop_words() const { return stop_words_; }

 private:
  std::unordered_set<std::string> stop_words_;
  std::unordered_map<std::string, std::string> lemmas_;
};

// Full-mode cleaning steps, exposed individually for tests.

/// Deletes every shortest "(Citation: ...)" span.
std::string strip_citations(std::string_view text);
/// Deletes substrings matching https?://\S+ and word-initial www\.\S+.
std::string strip_urls(std::string_view text);
/// Punctuation and whitespace become single spaces, other non-ASCII
/// characters are deleted. Output alphabet is [A-Za-z0-9 ].
std::string strip_non_alphanumeric(std::string_view text);

class Preprocessor {
 public:
  Preprocessor() : lexicon_(&Lexicon::builtin()) {}
  explicit Preprocessor(const Lexicon& lexicon) : lexicon_(&lexicon) {}

  /// Throws EncodingError on invalid UTF-8.
  CleanText run(std::string_view text, PreprocessMode mode, std::string source_id = {}) const;
  std::string normalize(std::string_view text, PreprocessMode mode) const;

  /// Full-mode cleaning with URL removal placed before citation removal
  /// instead of after. Used to check that the order does not matter.
  std::string normalize_full_urls_first(std::string_view text) const;

  std::vector<std::string> tokenize(std::string_view text) const;

  /// Lemma if the lexicon knows the token, otherwise the Porter stem, iterated
  /// to a fixed point. Tokens outside [a-z]+ are only looked up, never stemmed.
  std::string normalize_token(const std::string& token) const;

  const Lexicon& lexicon() const { return *lexicon_; }

 private:
  std::string partial(std::string_view text) const;

  const Lexicon* lexicon_;
};

/// Cleaned descriptions of one corpus. All entries share `mode`.
class CleanCorpus {
 public:
  explicit CleanCorpus(PreprocessMode mode) : mode_(mode) {}

  /// Throws ConsistencyError for a mode mismatch or a repeated source_id.
  void add(CleanText entry);

  PreprocessMode mode() const { return mode_; }
  const std::map<std::string, CleanText>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Entries whose source_id is a technique or CVE identifier, in id order.
  std::vector<CleanText> techniques() const;
  std::vector<CleanText> cves() const;

  std::string to_jsonl() const;
  /// Throws CorruptionError on malformed lines and ConsistencyError on mixed
  /// modes.
  static CleanCorpus from_jsonl(std::string_view raw);

 private:
  PreprocessMode mode_;
  std::map<std::string, CleanText> entries_;
};

/// Cleans every technique and CVE description. Errors carry the source_id.
CleanCorpus preprocess_corpus(const CorpusSnapshot& snapshot, PreprocessMode mode,
                              const Preprocessor& preprocessor = Preprocessor());

}  // namespace vuldat::text
