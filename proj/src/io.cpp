// SPDX-License-Identifier: Apache-2.0
#include "cbert/io.hpp"

#include <cstring>
#include <fstream>

namespace cbert {

void ByteWriter::u16(uint16_t v) {
    u8(static_cast<uint8_t>(v & 0xFF));
    u8(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::u32(uint32_t v) {
    u8(static_cast<uint8_t>(v & 0xFF));
    u8(static_cast<uint8_t>((v >> 8) & 0xFF));
    u8(static_cast<uint8_t>((v >> 16) & 0xFF));
    u8(static_cast<uint8_t>((v >> 24) & 0xFF));
}

void ByteWriter::f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u32(bits);
}

void ByteWriter::bytes(const void* p, size_t n) {
    buf_.append(static_cast<const char*>(p), n);
}

void ByteWriter::save(const std::string& path) const { write_file(path, buf_); }

ByteReader ByteReader::from_file(const std::string& path) {
    return ByteReader(read_file(path), path);
}

void ByteReader::need(size_t n) const {
    if (pos_ + n > data_.size()) {
        fail("truncated: need " + std::to_string(n) + " bytes");
    }
}

uint8_t ByteReader::u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
}

uint16_t ByteReader::u16() {
    need(2);
    const auto b0 = static_cast<uint8_t>(data_[pos_]);
    const auto b1 = static_cast<uint8_t>(data_[pos_ + 1]);
    pos_ += 2;
    return static_cast<uint16_t>(b0 | (b1 << 8));
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | static_cast<uint8_t>(data_[pos_ + static_cast<size_t>(i)]);
    }
    pos_ += 4;
    return v;
}

float ByteReader::f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::string ByteReader::bytes(size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
}

void ByteReader::expect_end() const {
    if (!at_end()) fail("trailing bytes");
}

void ByteReader::fail(const std::string& what) const {
    std::string where = source_.empty() ? "binary data" : source_;
    throw FormatError(where + ": " + what + " at offset " + std::to_string(pos_));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error("read failed: " + path);
    return data;
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed: " + path);
}

}  // namespace cbert
