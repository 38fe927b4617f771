#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabgrpo/dataset.hpp"
#include "tabgrpo/grpo.hpp"
#include "tabgrpo/policy.hpp"
#include "tabgrpo/prompting.hpp"
#include "tabgrpo/tokenizer.hpp"

namespace tabgrpo {

enum class DataSource { kCsv, kSynthetic };

/// Which text the vocabulary is counted over: only the serialized attributes
/// (system and query words become UNK) or the full prompts.
enum class VocabSource { kAttributes, kPrompts };

/// Everything one run needs. Loaded from a JSON object with flat dotted keys
/// such as "grpo.group_size"; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";

  std::string task_id = "synthetic";
  std::optional<std::string> task_query;
  std::vector<std::string> labels = {"good", "bad"};

  DataSource source = DataSource::kSynthetic;
  std::filesystem::path csv_path;
  std::vector<std::string> features;
  std::string label_column = "label";
  std::optional<std::string> missing_marker;
  SyntheticSpec synthetic;
  std::size_t synthetic_n = 1000;
  SplitFractions split;

  PromptOptions prompt;
  std::size_t vocab_max_size = 256;
  VocabSource vocab_source = VocabSource::kAttributes;
  Architecture arch;  // vocab_size comes from the built vocabulary
  TrainConfig train;

  Schema schema() const;
  TaskRegistry registry() const;
};

/// Parses JSON text. `base_dir` resolves relative file paths.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
/// Reads the file; TABGRPO_OUT, when set, replaces out_dir.
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON rendering, the inverse of parse_run_config.
std::string to_json_text(const RunConfig& cfg);

/// FNV-1a 64 of the canonical rendering, as 16 hex digits.
std::string config_digest(const RunConfig& cfg);

/// Dataset of the run (CSV or generated) split into train/val/test.
DatasetSplits prepare_splits(const RunConfig& cfg);

Vocab build_run_vocab(const RunConfig& cfg, const Dataset& train);

}  // namespace tabgrpo
