#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tabgrpo/policy.hpp"

namespace test_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(TABGRPO_FIXTURES) / name;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline tabgrpo::Architecture tiny_arch(int vocab = 11) {
  tabgrpo::Architecture arch;
  arch.vocab_size = vocab;
  arch.embed_dim = 3;
  arch.prompt_window = 3;
  arch.output_window = 2;
  arch.hidden_dim = 5;
  arch.max_positions = 4;
  return arch;
}

// Random parameters with a larger output scale than init_params, so the
// distributions are far from uniform.
inline tabgrpo::PolicyParams random_params(const tabgrpo::Architecture& arch, tabgrpo::Rng& rng,
                                           double scale = 0.7) {
  tabgrpo::PolicyParams p;
  p.arch = arch;
  p.theta.resize(arch.param_count());
  for (auto& v : p.theta) v = scale * tabgrpo::standard_normal(rng);
  return p;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tabgrpo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
