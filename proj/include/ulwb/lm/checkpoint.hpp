#pragma once
// Checkpoint container: magic "ULWB", u32 version, length-prefixed UTF-8
// config document, tensor name/shape table, then raw little-endian f32 data
// in table order. Round-trips are bit-exact.

#include "ulwb/lm/params.hpp"

#include <string>

namespace ulwb::lm {

constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointVersionError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct CheckpointCorruptError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct CheckpointShapeError : CheckpointError {
    using CheckpointError::CheckpointError;
};

void checkpoint_save(const Parameters<float>& params, const std::string& path);
Parameters<float> checkpoint_load(const std::string& path);

} // namespace ulwb::lm
