#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace s2l::lingua {

enum class ScriptId { Latin, Devanagari, Telugu };

std::string to_string(ScriptId s);
/// Recognition head id for a script: "en", "hi", "te".
std::string head_id(ScriptId s);
/// Language tied to a script: English, Hindi, Telugu.
std::string language_name(ScriptId s);
ScriptId script_for_head(const std::string& head);

/// Majority vote over letters by Unicode block: ASCII letters, Devanagari
/// (U+0900-U+097F) and Telugu (U+0C00-U+0C7F). Digits and dandas in the
/// Indic blocks do not count. Ties prefer Latin, then Devanagari.
/// Throws "no script content" when no letter is found.
ScriptId detect_script(std::string_view text);

/// Pluggable translation engine.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(std::string_view text) const = 0;
};

/// Word-by-word dictionary lookup; unknown words and all whitespace pass
/// through unchanged.
class TranslationDict : public Translator {
 public:
  TranslationDict() = default;
  explicit TranslationDict(std::map<std::string, std::string> entries);

  /// UTF-8 TSV, `native<TAB>english` per line.
  static TranslationDict load(const std::filesystem::path& path);

  std::string translate(std::string_view text) const override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

std::string translate_to_english(std::string_view text, const TranslationDict& dict);

struct Token {
  std::string text;
  std::size_t start = 0;  // byte span in the source string
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Punctuation that never survives tokenization.
bool is_punctuation(char32_t c);

/// Splits on whitespace, hyphens and the punctuation set
/// . , ; : ! ? ' " ( ) [ ] { }; empty fragments are dropped.
std::vector<Token> tokenize(std::string_view text);

/// Case-folded, whitespace-normalized set of place names.
class PlaceIndex {
 public:
  void add(std::string_view name);
  bool contains(std::string_view name) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_set<std::string> names_;
};

/// Tokens naming a known place, in input order with multiplicity.
std::vector<Token> filter_location_tokens(const std::vector<Token>& tokens, const PlaceIndex& index);

}  // namespace s2l::lingua
