#pragma once

#include <cstdint>
#include <string>

#include "drafter/model.hpp"

namespace drafter {

// Model snapshot plus training-loop state. Round-trips bit-exactly through
// the file format below.
struct Checkpoint {
    ToyLm model;
    int64_t step = 0;
    uint64_t rng_seed = 0;
    uint64_t rng_cursor = 0;
    std::string loss_kind = "none";
};

// Checkpoint file layout (little-endian):
//   magic "TLMCKPT1" (8 bytes), format version u32
//   kind u8, activation u8
//   config: vocab_size, context_len, layers, heads, hidden_dim,
//           intermediate_dim (i32 each)
//   step i64, rng_seed u64, rng_cursor u64
//   loss_kind: u32 length + bytes
//   tensor count u32, then per tensor in declaration order:
//     name (u32 length + bytes), rows u32, cols u32, rows*cols f64 values
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace drafter
