#include "s2l/lingua.hpp"

#include <cctype>
#include <fstream>

#include "s2l/error.hpp"
#include "s2l/utf8.hpp"

namespace s2l::lingua {

std::string to_string(ScriptId s) {
  switch (s) {
    case ScriptId::Latin: return "Latin";
    case ScriptId::Devanagari: return "Devanagari";
    case ScriptId::Telugu: return "Telugu";
  }
  return "?";
}

std::string head_id(ScriptId s) {
  switch (s) {
    case ScriptId::Latin: return "en";
    case ScriptId::Devanagari: return "hi";
    case ScriptId::Telugu: return "te";
  }
  return "?";
}

std::string language_name(ScriptId s) {
  switch (s) {
    case ScriptId::Latin: return "English";
    case ScriptId::Devanagari: return "Hindi";
    case ScriptId::Telugu: return "Telugu";
  }
  return "?";
}

ScriptId script_for_head(const std::string& head) {
  if (head == "en") return ScriptId::Latin;
  if (head == "hi") return ScriptId::Devanagari;
  if (head == "te") return ScriptId::Telugu;
  throw Error("unknown head id: " + head);
}

ScriptId detect_script(std::string_view text) {
  std::size_t latin = 0, devanagari = 0, telugu = 0;
  for (const auto& cp : utf8::decode(text)) {
    const char32_t c = cp.value;
    if ((c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z')) {
      ++latin;
    } else if (c >= 0x0900 && c <= 0x097F) {
      const bool digit = c >= 0x0966 && c <= 0x096F;
      const bool danda = c == 0x0964 || c == 0x0965;
      if (!digit && !danda) ++devanagari;
    } else if (c >= 0x0C00 && c <= 0x0C7F) {
      if (!(c >= 0x0C66 && c <= 0x0C6F)) ++telugu;
    }
  }
  if (latin + devanagari + telugu == 0) throw Error("no script content");
  if (latin >= devanagari && latin >= telugu) return ScriptId::Latin;
  if (devanagari >= telugu) return ScriptId::Devanagari;
  return ScriptId::Telugu;
}

TranslationDict::TranslationDict(std::map<std::string, std::string> entries) {
  for (auto& [k, v] : entries) {
    if (k.empty()) throw Error("empty dictionary key");
    entries_.emplace(k, std::move(v));
  }
}

TranslationDict TranslationDict::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dictionary " + path.string());
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected native<TAB>english");
    if (!entries.emplace(line.substr(0, tab), line.substr(tab + 1)).second)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": duplicate key");
  }
  return TranslationDict(std::move(entries));
}

std::string TranslationDict::translate(std::string_view text) const {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    const std::string_view word = text.substr(i, j - i);
    const auto it = entries_.find(word);
    out += it != entries_.end() ? std::string_view(it->second) : word;
    i = j;
  }
  return out;
}

std::string translate_to_english(std::string_view text, const TranslationDict& dict) {
  return dict.translate(text);
}

bool is_punctuation(char32_t c) {
  switch (c) {
    case U'.': case U',': case U';': case U':': case U'!': case U'?': case U'\'': case U'"':
    case U'(': case U')': case U'[': case U']': case U'{': case U'}': case U'-':
      return true;
    default:
      return false;
  }
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t start = 0;
  bool open = false;
  auto close = [&](std::size_t end) {
    if (open && end > start) tokens.push_back({std::string(text.substr(start, end - start)), start, end});
    open = false;
  };
  for (const auto& cp : utf8::decode(text)) {
    const bool space = cp.value < 0x80 && std::isspace(static_cast<int>(cp.value));
    if (space || is_punctuation(cp.value)) {
      close(cp.offset);
    } else if (!open) {
      open = true;
      start = cp.offset;
    }
  }
  close(text.size());
  return tokens;
}

void PlaceIndex::add(std::string_view name) {
  const std::string key = utf8::lookup_key(name);
  if (!key.empty()) names_.insert(key);
}

bool PlaceIndex::contains(std::string_view name) const {
  return names_.contains(utf8::lookup_key(name));
}

std::vector<Token> filter_location_tokens(const std::vector<Token>& tokens, const PlaceIndex& index) {
  std::vector<Token> out;
  for (const auto& t : tokens)
    if (index.contains(t.text)) out.push_back(t);
  return out;
}

}  // namespace s2l::lingua
