#include "tabgrpo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace tabgrpo {
namespace {

constexpr std::string_view kMagic = "tabgrpo-checkpoint";

[[noreturn]] void malformed(const std::string& what) {
  fail(ErrorCode::kIo, "malformed checkpoint: " + what);
}

std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) malformed("unexpected end of header");
  return line;
}

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::little) return bits;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  const auto& arch = checkpoint.params.arch;
  out << kMagic << ' ' << Checkpoint::kFormatVersion << '\n';
  out << "epoch " << checkpoint.epoch << '\n';
  out << "config_digest " << (checkpoint.config_digest.empty() ? "-" : checkpoint.config_digest) << '\n';
  out << "arch vocab_size=" << arch.vocab_size << " embed_dim=" << arch.embed_dim
      << " prompt_window=" << arch.prompt_window << " output_window=" << arch.output_window
      << " hidden_dim=" << arch.hidden_dim << " max_positions=" << arch.max_positions
      << " eos_id=" << arch.eos_id << '\n';
  out << "vocab " << checkpoint.vocab.size() << '\n';
  for (const auto& token : checkpoint.vocab.tokens()) out << token << '\n';
  out << "params " << checkpoint.params.theta.size() << " f64le\n";
  for (const double value : checkpoint.params.theta) {
    std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(value));
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint checkpoint;
  {
    std::istringstream line(next_line(in));
    std::string magic;
    int version = 0;
    line >> magic >> version;
    if (magic != kMagic) malformed("bad magic");
    if (version != Checkpoint::kFormatVersion) malformed("unsupported version " + std::to_string(version));
  }
  {
    std::istringstream line(next_line(in));
    std::string key;
    line >> key >> checkpoint.epoch;
    if (key != "epoch" || !line) malformed("expected epoch");
  }
  {
    std::istringstream line(next_line(in));
    std::string key;
    line >> key >> checkpoint.config_digest;
    if (key != "config_digest") malformed("expected config_digest");
    if (checkpoint.config_digest == "-") checkpoint.config_digest.clear();
  }
  Architecture arch;
  {
    std::istringstream line(next_line(in));
    std::string key;
    line >> key;
    if (key != "arch") malformed("expected arch");
    std::map<std::string, int> values;
    std::string item;
    while (line >> item) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) malformed("bad arch entry '" + item + "'");
      values[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
    }
    auto get = [&](const char* name) {
      const auto it = values.find(name);
      if (it == values.end()) malformed(std::string("arch lacks ") + name);
      return it->second;
    };
    arch.vocab_size = get("vocab_size");
    arch.embed_dim = get("embed_dim");
    arch.prompt_window = get("prompt_window");
    arch.output_window = get("output_window");
    arch.hidden_dim = get("hidden_dim");
    arch.max_positions = get("max_positions");
    arch.eos_id = get("eos_id");
    arch.validate();
  }
  {
    std::istringstream line(next_line(in));
    std::string key;
    std::size_t count = 0;
    line >> key >> count;
    if (key != "vocab" || !line) malformed("expected vocab");
    std::vector<std::string> tokens;
    tokens.reserve(count);
    for (std::size_t i = 0; i < count; ++i) tokens.push_back(next_line(in));
    checkpoint.vocab = Vocab::from_tokens(std::move(tokens));
    if (checkpoint.vocab.size() != static_cast<std::size_t>(arch.vocab_size)) {
      malformed("vocab size does not match architecture");
    }
  }
  std::size_t count = 0;
  {
    std::istringstream line(next_line(in));
    std::string key, encoding;
    line >> key >> count >> encoding;
    if (key != "params" || encoding != "f64le") malformed("expected params");
    if (count != arch.param_count()) malformed("parameter count does not match architecture");
  }
  checkpoint.params.arch = arch;
  checkpoint.params.theta.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    char bytes[8];
    if (!in.read(bytes, 8)) malformed("truncated parameter block");
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    checkpoint.params.theta[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  if (!checkpoint.params.all_finite()) malformed("non-finite parameters");
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write_checkpoint(out, checkpoint);
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace tabgrpo
