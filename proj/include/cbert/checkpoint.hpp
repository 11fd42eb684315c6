// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cbert/model.hpp"
#include "cbert/params.hpp"
#include "cbert/vocab.hpp"

namespace cbert {

// Checkpoint file: magic "CBRT", version u16 = 1, config block (u32 byte
// length + UTF-8 key=value lines), tensor count u32, then per tensor:
// name length u16 + UTF-8 name, ndim u8, each dim u32, f32 data in row
// major order. All integers little-endian. Values are stored in 32-bit
// precision; loading widens back to the runtime's 64-bit floats.
struct Checkpoint {
    std::string config_text;
    ParamStore params;
};

std::string checkpoint_to_bytes(const ParamStore& params, const std::string& config_text);
Checkpoint checkpoint_from_bytes(const std::string& data, const std::string& source = "");
void save_checkpoint(const ParamStore& params, const std::string& config_text,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Structured view of a config block.
struct CheckpointMeta {
    ModelConfig config;
    std::string vocab_chars;
    std::string task = "mlm";             // mlm | classify | tag
    std::vector<std::string> labels;      // head label names, empty for mlm
    std::vector<std::pair<std::string, std::string>> run_echo;  // "run."-prefixed lines
};

std::string meta_to_text(const CheckpointMeta& meta);
CheckpointMeta meta_from_text(const std::string& text);

// Loads a checkpoint, parses its config block and validates every tensor
// shape against it (FormatError naming the first mismatched tensor).
struct LoadedModel {
    CheckpointMeta meta;
    Vocab vocab;
    ParamStore params;
};
LoadedModel load_model(const std::string& path);

}  // namespace cbert
