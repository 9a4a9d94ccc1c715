#pragma once

#include <string>

#include "mprl/model.hpp"
#include "mprl/vocab.hpp"

namespace mprl {

/// Binary checkpoint, little-endian throughout:
///
///   "MPRL"                      magic
///   u32  version (currently 1)
///   u32  n_layers, d_model, n_heads, d_ff, vocab_size, max_seq_len
///   u64  init_seed
///   u32  symbol count, then per symbol: u8 length + bytes
///        (specials spelled "<pad>" / "<eos>")
///   u64  total parameter element count
///   f32  parameter values in canonical order
///   u64  FNV-1a checksum of every byte after the magic
///
/// Training runs in f64; storage is f32, so load(save(x)) reproduces
/// parameters to single precision and a second round trip is exact.
void save_checkpoint(const ModelParams& params, const Vocab& vocab, const std::string& path);

struct LoadedCheckpoint {
  ModelParams params;
  Vocab vocab;
};

/// Corruption errors name the failed check (magic, version, structure,
/// or checksum).
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace mprl
