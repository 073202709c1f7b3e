#pragma once

#include <iosfwd>

#include "gdcl/nnet.hpp"

// Binary model snapshot, version 1. All integers are little-endian uint64,
// all reals little-endian IEEE-754 binary64.
//
//   magic      8 bytes "GDCLMODL"
//   version    u64 (= 1)
//   input_dim  u64
//   n_trunk    u64, then per trunk layer: rows, cols, weight (row-major), bias
//   n_heads    u64, then per head: rows, cols, weight (row-major), bias
//
// Head sizes are the head row counts.
namespace gdcl::nnet {

inline constexpr std::uint64_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const Model& model);
Model load_checkpoint(std::istream& in);

}  // namespace gdcl::nnet
