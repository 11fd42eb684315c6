// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbert/common.hpp"

namespace cbert {

// Little-endian binary writer backed by an in-memory buffer.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void f32(float v);
    void bytes(const void* p, size_t n);
    void str(const std::string& s) { bytes(s.data(), s.size()); }

    const std::string& buffer() const { return buf_; }
    void save(const std::string& path) const;

private:
    std::string buf_;
};

// Little-endian binary reader with offset-aware errors.
class ByteReader {
public:
    explicit ByteReader(std::string data, std::string source = "")
        : data_(std::move(data)), source_(std::move(source)) {}

    static ByteReader from_file(const std::string& path);

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    float f32();
    std::string bytes(size_t n);
    size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == data_.size(); }
    void expect_end() const;

    [[noreturn]] void fail(const std::string& what) const;

private:
    void need(size_t n) const;

    std::string data_;
    std::string source_;
    size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

}  // namespace cbert
