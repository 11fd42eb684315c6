// SPDX-License-Identifier: Apache-2.0
#include "cbert/glyph.hpp"

#include "cbert/io.hpp"
#include "cbert/rng.hpp"

namespace cbert {

namespace {
constexpr char kAtlasMagic[4] = {'C', 'B', 'G', 'A'};
constexpr uint16_t kAtlasVersion = 1;
}  // namespace

void GlyphAtlas::put(uint32_t codepoint, const GlyphImage& image) {
    entries_[codepoint] = image;
}

const GlyphImage& GlyphAtlas::blank() {
    static const GlyphImage zero{};
    return zero;
}

const GlyphImage& GlyphAtlas::lookup(uint32_t codepoint) const {
    const auto it = entries_.find(codepoint);
    return it == entries_.end() ? blank() : it->second;
}

std::string atlas_to_bytes(const GlyphAtlas& atlas) {
    ByteWriter w;
    w.bytes(kAtlasMagic, 4);
    w.u16(kAtlasVersion);
    w.u32(static_cast<uint32_t>(atlas.size()));
    for (const auto& [cp, image] : atlas.entries()) {  // std::map keeps ascending order
        w.u32(cp);
        w.bytes(image.data(), image.size());
    }
    return w.buffer();
}

void write_atlas(const GlyphAtlas& atlas, const std::string& path) {
    write_file(path, atlas_to_bytes(atlas));
}

GlyphAtlas atlas_from_bytes(const std::string& data, const std::string& source) {
    ByteReader r(data, source);
    const std::string magic = r.bytes(4);
    if (magic != std::string(kAtlasMagic, 4)) {
        ByteReader at_start(data, source);
        at_start.fail("bad atlas magic '" + magic + "'");
    }
    const uint16_t version = r.u16();
    if (version != kAtlasVersion) {
        throw FormatError((source.empty() ? "atlas" : source) + ": unsupported version " +
                          std::to_string(version) + " at offset 4");
    }
    const uint32_t count = r.u32();
    GlyphAtlas atlas;
    uint32_t prev_cp = 0;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t cp = r.u32();
        if (i > 0 && cp <= prev_cp) {
            throw FormatError((source.empty() ? "atlas" : source) +
                              ": entries not sorted ascending at offset " +
                              std::to_string(r.offset() - 4));
        }
        prev_cp = cp;
        const std::string img = r.bytes(kGlyphBytes);
        GlyphImage image;
        for (int j = 0; j < kGlyphBytes; ++j) {
            image[static_cast<size_t>(j)] = static_cast<uint8_t>(img[static_cast<size_t>(j)]);
        }
        atlas.put(cp, image);
    }
    r.expect_end();
    return atlas;
}

GlyphAtlas load_atlas(const std::string& path) {
    return atlas_from_bytes(read_file(path), path);
}

GlyphImage synth_glyph(uint32_t codepoint) {
    GlyphImage image;
    for (int font = 0; font < kGlyphFonts; ++font) {
        for (int px = 0; px < kGlyphSide * kGlyphSide; ++px) {
            const uint64_t h = CounterRng::derive_key(
                {0x676C796068ull, codepoint, static_cast<uint64_t>(font),
                 static_cast<uint64_t>(px)});
            image[static_cast<size_t>(font * kGlyphSide * kGlyphSide + px)] =
                static_cast<uint8_t>(h & 0xFF);
        }
    }
    return image;
}

Tensor flatten_normalize(const GlyphImage& image) {
    Tensor out({kGlyphFlatWidth});
    for (int i = 0; i < kGlyphFlatWidth; ++i) {
        out[static_cast<size_t>(i)] =
            static_cast<double>(image[static_cast<size_t>(i % kGlyphBytes)]) / 255.0;
    }
    return out;
}

Value glyph_embed(Tape& tape, Value weight, Value bias, const GlyphImage& image) {
    Tensor flat = flatten_normalize(image);
    Value x = tape.constant(Tensor({1, kGlyphFlatWidth}, std::move(flat.raw())));
    Value y = tape.add_row(tape.matmul(x, weight), bias);  // [1 x D]
    return tape.reshape(y, {tape.value(y).cols()});
}

}  // namespace cbert
