#include "vuldat/preprocess.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "vuldat/error.hpp"
#include "vuldat/file_util.hpp"
#include "vuldat/porter_stemmer.hpp"
#include "vuldat/utf8.hpp"

namespace vuldat::text {

// Defined in the generated builtin_lexicon.cpp.
extern const char* const kBuiltinStopwords;
extern const char* const kBuiltinLemmaTable;

PreprocessMode parse_mode(std::string_view tag) {
  if (tag == "partial") return PreprocessMode::kPartial;
  if (tag == "full") return PreprocessMode::kFull;
  throw ConfigError("unknown preprocess mode '" + std::string(tag) + "' (expected partial|full)");
}

const char* to_string(PreprocessMode mode) noexcept {
  return mode == PreprocessMode::kFull ? "full" : "partial";
}

namespace {

bool is_ascii_alnum(char32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Token boundaries: ASCII non-alphanumerics plus the Unicode space,
// punctuation and symbol blocks that show up in English prose.
bool is_boundary(char32_t cp) {
  if (cp < 0x80) return !is_ascii_alnum(cp);
  return (cp >= 0x00A0 && cp <= 0x00BF) || cp == 0x00D7 || cp == 0x00F7 ||
         (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x2E00 && cp <= 0x2E7F) ||
         (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
         (cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) || cp == 0xFEFF;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;  // Latin-1
  if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) return cp + 0x20;  // Greek
  if (cp >= 0x0410 && cp <= 0x042F) return cp + 0x20;                  // Cyrillic
  if (cp >= 0x0400 && cp <= 0x040F) return cp + 0x50;
  return cp;
}

bool is_lower_alpha(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

bool is_lower_alnum(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
  });
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_with_icase(std::string_view text, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > text.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != prefix[i]) return false;
  }
  return true;
}

template <typename Fn>
void for_each_line(std::string_view raw, Fn fn) {
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = raw.substr(start, end - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() != '#') fn(line, line_no);
    if (end == raw.size()) break;
    start = end + 1;
  }
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Lexicon

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = parse(kBuiltinStopwords, kBuiltinLemmaTable);
  return lexicon;
}

Lexicon Lexicon::parse(std::string_view stopwords_txt, std::string_view lemma_tsv) {
  Lexicon lex;
  for_each_line(stopwords_txt, [&](std::string_view line, std::size_t line_no) {
    std::string word = trim(line);
    if (word.empty()) return;
    if (!is_lower_alnum(word)) {
      throw ConfigError("stopwords line " + std::to_string(line_no) + ": '" + word +
                        "' is not lowercase alphanumeric");
    }
    lex.stop_words_.insert(std::move(word));
  });
  for_each_line(lemma_tsv, [&](std::string_view line, std::size_t line_no) {
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ConfigError("lemma table line " + std::to_string(line_no) + " has no tab");
    }
    std::string form = trim(line.substr(0, tab));
    std::string lemma = trim(line.substr(tab + 1));
    if (!is_lower_alnum(form) || !is_lower_alnum(lemma)) {
      throw ConfigError("lemma table line " + std::to_string(line_no) +
                        " must hold lowercase alphanumeric words");
    }
    lex.lemmas_[form] = lemma;
  });
  // Lemmas are dictionary entries in their own right.
  std::vector<std::string> targets;
  for (const auto& [form, lemma] : lex.lemmas_) targets.push_back(lemma);
  for (auto& lemma : targets) lex.lemmas_[lemma] = lemma;
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& stopwords,
                      const std::filesystem::path& lemma_table) {
  return parse(read_file(stopwords), read_file(lemma_table));
}

bool Lexicon::is_stop_word(std::string_view token) const {
  return stop_words_.contains(std::string(token));
}

const std::string* Lexicon::lemma(std::string_view token) const {
  auto it = lemmas_.find(std::string(token));
  return it == lemmas_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Full-mode cleaning

std::string strip_citations(std::string_view text) {
  static constexpr std::string_view kOpen = "(Citation:";
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find(kOpen, pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find(')', open + kOpen.size());
    if (close == std::string_view::npos) break;  // unterminated: keep as is
    out.append(text.substr(pos, open - pos));
    out.push_back(' ');
    pos = close + 1;
  }
  out.append(text.substr(std::min(pos, text.size())));
  return out;
}

std::string strip_urls(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t prefix = 0;
    if (starts_with_icase(text, i, "https://")) {
      prefix = 8;
    } else if (starts_with_icase(text, i, "http://")) {
      prefix = 7;
    } else if (starts_with_icase(text, i, "www.")) {
      const bool word_start =
          i == 0 || !(std::isalnum(static_cast<unsigned char>(text[i - 1])) || text[i - 1] == '_');
      if (word_start) prefix = 4;
    }
    // The pattern needs at least one non-space character after the prefix.
    if (prefix != 0 && i + prefix < text.size() && !is_space(text[i + prefix])) {
      std::size_t end = i + prefix;
      while (end < text.size() && !is_space(text[end])) ++end;
      out.push_back(' ');
      i = end;
      continue;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::string strip_non_alphanumeric(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t cp : utf8::decode(text)) {
    if (is_ascii_alnum(cp)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(cp));
    } else if (is_boundary(cp)) {
      pending_space = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessor

std::vector<std::string> Preprocessor::tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : utf8::decode(text)) {
    if (is_boundary(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      utf8::append(current, to_lower(cp));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string Preprocessor::normalize_token(const std::string& token) const {
  std::string current = token;
  // Each step either lands on a lemma (a fixed point) or shortens the word
  // via the stemmer, so this terminates quickly; the bound is a backstop.
  for (int i = 0; i < 32; ++i) {
    std::string next;
    if (const std::string* lemma = lexicon_->lemma(current)) {
      next = *lemma;
    } else if (is_lower_alpha(current)) {
      next = porter_stem(current);
    } else {
      next = current;
    }
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::string Preprocessor::partial(std::string_view text) const {
  std::string out;
  for (const auto& token : tokenize(text)) {
    if (lexicon_->is_stop_word(token)) continue;
    std::string normalized = normalize_token(token);
    if (normalized.empty() || lexicon_->is_stop_word(normalized)) continue;
    if (!out.empty()) out.push_back(' ');
    out += normalized;
  }
  return out;
}

std::string Preprocessor::normalize(std::string_view text, PreprocessMode mode) const {
  if (auto bad = utf8::find_invalid(text)) throw EncodingError("invalid UTF-8 sequence", *bad);
  if (mode == PreprocessMode::kPartial) return partial(text);
  return partial(strip_non_alphanumeric(strip_urls(strip_citations(text))));
}

std::string Preprocessor::normalize_full_urls_first(std::string_view text) const {
  if (auto bad = utf8::find_invalid(text)) throw EncodingError("invalid UTF-8 sequence", *bad);
  return partial(strip_non_alphanumeric(strip_citations(strip_urls(text))));
}

CleanText Preprocessor::run(std::string_view text, PreprocessMode mode,
                            std::string source_id) const {
  return CleanText{normalize(text, mode), mode, std::move(source_id)};
}

// ---------------------------------------------------------------------------
// CleanCorpus

void CleanCorpus::add(CleanText entry) {
  if (entry.mode != mode_) {
    throw ConsistencyError("entry " + entry.source_id + " was cleaned in " +
                           to_string(entry.mode) + " mode but the corpus is " + to_string(mode_));
  }
  const std::string id = entry.source_id;
  if (!entries_.emplace(id, std::move(entry)).second) {
    throw ConsistencyError("duplicate source_id " + id + " in clean corpus");
  }
}

std::vector<CleanText> CleanCorpus::techniques() const {
  std::vector<CleanText> out;
  for (const auto& [id, entry] : entries_) {
    if (is_technique_id(id)) out.push_back(entry);
  }
  return out;
}

std::vector<CleanText> CleanCorpus::cves() const {
  std::vector<CleanText> out;
  for (const auto& [id, entry] : entries_) {
    if (is_cve_id(id)) out.push_back(entry);
  }
  return out;
}

std::string CleanCorpus::to_jsonl() const {
  std::string out;
  for (const auto& [id, entry] : entries_) {
    nlohmann::ordered_json j;
    j["source_id"] = id;
    j["mode"] = to_string(entry.mode);
    j["text"] = entry.text;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

CleanCorpus CleanCorpus::from_jsonl(std::string_view raw) {
  std::vector<CleanText> entries;
  for_each_line(raw, [&](std::string_view line, std::size_t line_no) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line.begin(), line.end());
      entries.push_back(CleanText{j.at("text").get<std::string>(),
                                  parse_mode(j.at("mode").get<std::string>()),
                                  j.at("source_id").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw CorruptionError("clean corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw CorruptionError("clean corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  CleanCorpus corpus(entries.empty() ? PreprocessMode::kPartial : entries.front().mode);
  for (auto& e : entries) corpus.add(std::move(e));
  return corpus;
}

CleanCorpus preprocess_corpus(const CorpusSnapshot& snapshot, PreprocessMode mode,
                              const Preprocessor& preprocessor) {
  CleanCorpus corpus(mode);
  auto add = [&](const std::string& id, const std::string& description) {
    if (description.empty()) {
      throw ConsistencyError(id + ": empty description reached preprocessing");
    }
    try {
      corpus.add(preprocessor.run(description, mode, id));
    } catch (const EncodingError& e) {
      throw EncodingError(id + ": invalid UTF-8 sequence", e.offset());
    }
  };
  for (const auto& t : snapshot.techniques) add(t.technique_id, t.description);
  for (const auto& c : snapshot.cves) add(c.cve_id, c.description);
  return corpus;
}

}  // namespace vuldat::text
