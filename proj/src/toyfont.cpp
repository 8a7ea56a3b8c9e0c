#include "s2l/toyfont.hpp"

#include <array>
#include <string_view>

#include "s2l/error.hpp"

namespace s2l::toyfont {

namespace {

struct Glyph {
  char c;
  std::array<std::string_view, kGlyphRows> rows;
};

constexpr std::array<Glyph, 36> kGlyphs{{
    {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
    {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
    {'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
    {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
    {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
    {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"}},
    {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
    {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
    {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
    {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
    {'N', {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"}},
    {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
    {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
    {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
    {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
    {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
    {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
    {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
    {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
    {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
    {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
    {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
    {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
    {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
    {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
    {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
    {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
    {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
    {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
    {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
}};

const Glyph* find_glyph(char c) {
  for (const auto& g : kGlyphs)
    if (g.c == c) return &g;
  return nullptr;
}

template <class Plot>
void rasterize(const std::string& word, Plot plot) {
  for (std::size_t k = 0; k < word.size(); ++k) {
    const Glyph* g = find_glyph(word[k]);
    if (!g) throw Error(std::string("toy font has no glyph for '") + word[k] + "'");
    const int x0 = kMargin + static_cast<int>(k) * (kCell + kGap);
    for (int r = 0; r < kGlyphRows; ++r)
      for (int c = 0; c < kGlyphCols; ++c)
        if (g->rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#')
          for (int dy = 0; dy < kScale; ++dy)
            for (int dx = 0; dx < kScale; ++dx) plot(x0 + c * kScale + dx, kTop + r * kScale + dy);
  }
}

}  // namespace

bool has_glyph(char c) { return find_glyph(c) != nullptr; }

int word_width(const std::string& word) {
  return kMargin + static_cast<int>(word.size()) * (kCell + kGap);
}

GrayImage render_word(const std::string& word) {
  GrayImage img(word_width(word), kHeight, 0);
  rasterize(word, [&](int x, int y) { img.at(x, y) = 255; });
  return img;
}

void draw_word(RgbImage& img, const std::string& word, int x, int y,
               const std::array<std::uint8_t, 3>& ink) {
  rasterize(word, [&](int px, int py) {
    const int tx = x + px;
    const int ty = y + py;
    if (tx < 0 || ty < 0 || tx >= img.width || ty >= img.height) return;
    for (int c = 0; c < 3; ++c) img.at(tx, ty, c) = ink[static_cast<std::size_t>(c)];
  });
}

const std::vector<std::string>& sample_words() {
  static const std::vector<std::string> words{
      "KAHARA", "SAHARSA", "DELHI",  "PATNA",  "BIHAR",  "KOLKATA", "AGRA",
      "PUNE",   "GOA",     "SURAT",  "INDORE", "BHOPAL", "RANCHI",  "MYSORE",
      "NAGPUR", "JAIPUR",  "KOCHI",  "SALEM",  "VELLORE", "ODISHA"};
  return words;
}

std::vector<seqnet::TrainingExample> training_set(const std::vector<std::string>& words,
                                                  const seqnet::Alphabet& alphabet) {
  std::vector<seqnet::TrainingExample> out;
  for (const auto& w : words)
    out.push_back({seqnet::strips_from_image(render_word(w)), alphabet.encode(w)});
  return out;
}

}  // namespace s2l::toyfont
