// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "cbert/tape.hpp"
#include "cbert/tensor.hpp"

namespace cbert {

inline constexpr int kGlyphSide = 24;
inline constexpr int kGlyphFonts = 3;                                   // FangSong, XingKai, LiShu
inline constexpr int kGlyphBytes = kGlyphFonts * kGlyphSide * kGlyphSide;  // 1728
inline constexpr int kGlyphFlatWidth = 2352;  // FC input width; see flatten_normalize

using GlyphImage = std::array<uint8_t, kGlyphBytes>;

// Per-codepoint stack of three 24x24 grayscale font renderings, font-major
// then row-major. Immutable once loaded; lookups of absent codepoints
// return the shared all-zero stack and never fail.
class GlyphAtlas {
public:
    void put(uint32_t codepoint, const GlyphImage& image);
    const GlyphImage& lookup(uint32_t codepoint) const;
    bool contains(uint32_t codepoint) const { return entries_.count(codepoint) != 0; }
    size_t size() const { return entries_.size(); }
    const std::map<uint32_t, GlyphImage>& entries() const { return entries_; }

    static const GlyphImage& blank();

private:
    std::map<uint32_t, GlyphImage> entries_;  // sorted by codepoint
};

// Atlas file: magic "CBGA", version u16 = 1, entry count u32, then per
// entry a u32 codepoint followed by the 1728 image bytes. Entries sorted
// ascending by codepoint. All integers little-endian.
GlyphAtlas load_atlas(const std::string& path);
void write_atlas(const GlyphAtlas& atlas, const std::string& path);
std::string atlas_to_bytes(const GlyphAtlas& atlas);
GlyphAtlas atlas_from_bytes(const std::string& data, const std::string& source = "");

// Deterministic stand-in for font rendering: every byte is a fixed 64-bit
// hash of (codepoint, font index, pixel index).
GlyphImage synth_glyph(uint32_t codepoint);

// Normalizes the 1728 pixel bytes to [0,1] (divide by 255) in font-major,
// row, column order, then tiles them cyclically up to the fixed FC input
// width of 2352: out[i] = px[i mod 1728].
Tensor flatten_normalize(const GlyphImage& image);

// weight^T . flatten_normalize(image) + bias, on the tape.
Value glyph_embed(Tape& tape, Value weight, Value bias, const GlyphImage& image);

}  // namespace cbert
