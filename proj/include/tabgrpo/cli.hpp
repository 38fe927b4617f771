#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabgrpo/evaluation.hpp"

namespace tabgrpo::cli {

/// Column order of metrics.csv and eval.csv.
inline constexpr std::string_view kMetricsHeader =
    "epoch,split,mean_reward,format_rate,validity_rate,accuracy,weighted_f1,mean_kl,clip_fraction,"
    "wall_seconds";

std::string format_metrics_row(const Metrics& m, double clip_fraction, double wall_seconds);

struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};

struct EvalOptions {
  CommonOptions common;
  std::filesystem::path checkpoint;
  std::optional<std::string> dataset;
  std::string split = "test";
  std::optional<int> top_k;
  std::optional<double> temperature;
};

struct SampleOptions {
  EvalOptions eval;
  long index = 0;
};

int cmd_train(const CommonOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_sample(const SampleOptions& options, std::ostream& out, std::ostream& err);
int cmd_gendata(const CommonOptions& options, std::ostream& out, std::ostream& err);

/// Parses `tabgrpo <command> [flags]` and dispatches. Returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tabgrpo::cli
