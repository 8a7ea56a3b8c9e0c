#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "s2l/image.hpp"
#include "s2l/seqnet.hpp"

namespace s2l::toyfont {

// 5x7 bitmap glyphs for A-Z and 0-9, drawn at 3x scale. Each character
// takes a 16 px glyph cell followed by an 8 px gap, after an 8 px left
// margin, so a word of n characters is 8 + 24 n pixels wide and maps onto
// 3 n + 1 strips of 8 px.
inline constexpr int kScale = 3;
inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 7;
inline constexpr int kMargin = 8;
inline constexpr int kCell = 16;
inline constexpr int kGap = 8;
inline constexpr int kHeight = 32;
inline constexpr int kTop = (kHeight - kGlyphRows * kScale) / 2;

bool has_glyph(char c);
int word_width(const std::string& word);

/// Binary image: glyph pixels 255, background 0.
GrayImage render_word(const std::string& word);

/// Draws `word` into an RGB image with its top-left corner at (x, y).
void draw_word(RgbImage& img, const std::string& word, int x, int y,
               const std::array<std::uint8_t, 3>& ink);

/// Twenty Indian place names used to train the reference English head.
const std::vector<std::string>& sample_words();

/// Rendered strips and label targets for each word.
std::vector<seqnet::TrainingExample> training_set(const std::vector<std::string>& words,
                                                  const seqnet::Alphabet& alphabet);

}  // namespace s2l::toyfont
