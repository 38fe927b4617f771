#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "tabgrpo/policy.hpp"
#include "tabgrpo/tokenizer.hpp"

namespace tabgrpo {

/// On disk: a text header
///
///   tabgrpo-checkpoint 1
///   epoch <n>
///   config_digest <hex>
///   arch vocab_size=.. embed_dim=.. prompt_window=.. output_window=.. hidden_dim=.. max_positions=.. eos_id=..
///   vocab <count>
///   <one token per line>
///   params <count> f64le
///
/// followed by the parameters as little-endian IEEE-754 doubles in flat order.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int epoch = 0;
  std::string config_digest;
  Vocab vocab;
  PolicyParams params;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws kIo when the file is missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tabgrpo
