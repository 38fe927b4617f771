#include "tabgrpo/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tabgrpo/checkpoint.hpp"
#include "tabgrpo/config.hpp"
#include "tabgrpo/grpo.hpp"
#include "tabgrpo/rollout.hpp"

namespace tabgrpo::cli {
namespace {

RunConfig load(const CommonOptions& options) {
  RunConfig cfg = load_run_config(options.config);
  if (options.out_dir) cfg.out_dir = *options.out_dir;
  if (options.seed) cfg.seed = *options.seed;
  return cfg;
}

std::filesystem::path checkpoint_path(const RunConfig& cfg, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
  return cfg.out_dir / "checkpoints" / name;
}

void append_row(const std::filesystem::path& path, const std::string& row) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorCode::kIo, "cannot append to " + path.string());
  if (fresh) out << kMetricsHeader << '\n';
  out << row << '\n';
}

std::string summary(const Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "weighted_f1=%.4f accuracy=%.4f format_rate=%.4f validity_rate=%.4f mean_reward=%.4f",
                m.weighted_f1, m.accuracy, m.format_rate, m.validity_rate, m.mean_reward);
  return buf;
}

// Prompts of one split, encoded with the given vocabulary.
std::vector<Prompt> split_prompts(const RunConfig& cfg, const EvalOptions& options, const Vocab& vocab) {
  if (options.dataset && *options.dataset != cfg.task_id) {
    fail(ErrorCode::kLookup, "dataset '" + *options.dataset + "' is not the configured task '" +
                                 cfg.task_id + "'");
  }
  const DatasetSplits splits = prepare_splits(cfg);
  const SplitTag tag = parse_split_tag(options.split);
  Dataset all;
  const Dataset* dataset = nullptr;
  if (tag == SplitTag::kAll) {
    all = splits.train;
    all.records.clear();
    for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
      all.records.insert(all.records.end(), part->records.begin(), part->records.end());
    }
    dataset = &all;
  } else {
    dataset = &splits.at(tag);
  }
  return build_prompts(cfg.registry(), *dataset, vocab, cfg.prompt);
}

SamplerConfig eval_sampler(const RunConfig& cfg, const EvalOptions& options) {
  SamplerConfig sampler = cfg.train.eval_sampler;
  if (options.top_k) sampler.top_k = *options.top_k;
  if (options.temperature) sampler.temperature = *options.temperature;
  if (options.common.seed) sampler.seed = *options.common.seed;
  return sampler;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace

std::string format_metrics_row(const Metrics& m, double clip_fraction, double wall_seconds) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f", m.epoch,
                m.split_tag.c_str(), m.mean_reward, m.format_rate, m.validity_rate, m.accuracy,
                m.weighted_f1, m.mean_kl, clip_fraction, wall_seconds);
  return buf;
}

int cmd_train(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(options);
    const DatasetSplits splits = prepare_splits(cfg);
    const Vocab vocab = build_run_vocab(cfg, splits.train);
    const TaskRegistry registry = cfg.registry();
    const auto train_prompts = build_prompts(registry, splits.train, vocab, cfg.prompt);
    const auto val_prompts = build_prompts(registry, splits.val, vocab, cfg.prompt);
    const auto test_prompts = build_prompts(registry, splits.test, vocab, cfg.prompt);

    Architecture arch = cfg.arch;
    arch.vocab_size = static_cast<int>(vocab.size());
    PolicyParams params = init_params(arch, cfg.seed);
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = cfg.seed;
    const std::string digest = config_digest(cfg);

    std::filesystem::create_directories(cfg.out_dir / "checkpoints");
    {
      std::ofstream echo(cfg.out_dir / "config.json");
      echo << to_json_text(cfg) << '\n';
    }
    const auto metrics_path = cfg.out_dir / "metrics.csv";
    {
      std::ofstream csv(metrics_path, std::ios::trunc);
      if (!csv) fail(ErrorCode::kIo, "cannot write " + metrics_path.string());
      csv << kMetricsHeader << '\n';
    }
    std::filesystem::remove(cfg.out_dir / "best_epoch.txt");

    out << "task " << cfg.task_id << ": " << splits.train.size() << "/" << splits.val.size() << "/"
        << splits.test.size() << " train/val/test, vocab " << vocab.size() << ", "
        << params.theta.size() << " parameters\n";
    const Metrics initial = evaluate(params, val_prompts, vocab, train_cfg.eval_sampler, train_cfg.rewards);
    out << "initial val: " << summary(initial) << '\n';

    const auto history = train(params, vocab, train_prompts, val_prompts, train_cfg,
                               [&](const EpochRecord& record, const PolicyParams& current) {
                                 append_row(metrics_path, format_metrics_row(record.validation,
                                                                             record.clip_fraction,
                                                                             record.wall_seconds));
                                 save_checkpoint(checkpoint_path(cfg, record.validation.epoch),
                                                 {record.validation.epoch, digest, vocab, current});
                                 out << "epoch " << record.validation.epoch << " val: "
                                     << summary(record.validation) << '\n';
                               });

    if (history.epochs.empty()) {
      out << (history.stopped_by_budget ? "time budget exhausted before the first epoch\n"
                                        : "no epochs configured\n");
      return 0;
    }
    const auto validation = history.validation();
    const int best = select_best_epoch(validation);
    {
      std::ofstream marker(cfg.out_dir / "best_epoch.txt");
      marker << "epoch " << best << '\n'
             << "checkpoint " << checkpoint_path(cfg, best).lexically_relative(cfg.out_dir).string() << '\n';
    }
    const Checkpoint best_ckpt = load_checkpoint(checkpoint_path(cfg, best));
    Metrics test = evaluate(best_ckpt.params, test_prompts, vocab, train_cfg.eval_sampler, train_cfg.rewards);
    out << "best epoch " << best << " test: " << summary(test) << '\n';
    return 0;
  });
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(options.common);
    const Checkpoint checkpoint = load_checkpoint(options.checkpoint);
    const auto prompts = split_prompts(cfg, options, checkpoint.vocab);
    const auto start = std::chrono::steady_clock::now();
    Metrics m = evaluate(checkpoint.params, prompts, checkpoint.vocab, eval_sampler(cfg, options),
                         cfg.train.rewards);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.epoch = checkpoint.epoch;
    m.split_tag = options.split;
    const std::string row = format_metrics_row(m, 0.0, seconds);
    out << kMetricsHeader << '\n' << row << '\n';
    std::filesystem::create_directories(cfg.out_dir);
    append_row(cfg.out_dir / "eval.csv", row);
    return 0;
  });
}

int cmd_sample(const SampleOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(options.eval.common);
    const Checkpoint checkpoint = load_checkpoint(options.eval.checkpoint);
    const auto prompts = split_prompts(cfg, options.eval, checkpoint.vocab);
    if (options.index < 0 || static_cast<std::size_t>(options.index) >= prompts.size()) {
      fail(ErrorCode::kLookup, "record index " + std::to_string(options.index) + " outside split of size " +
                                   std::to_string(prompts.size()));
    }
    const Prompt& prompt = prompts[static_cast<std::size_t>(options.index)];
    const SamplerConfig sampler = eval_sampler(cfg, options.eval);
    Rng rng(sampler.seed);
    const Rollout rollout = sample(checkpoint.params, prompt, checkpoint.vocab, sampler, rng);
    const RewardBreakdown reward = score(rollout.text, prompt.allowed_labels, prompt.gold_label, cfg.train.rewards);
    out << "Input Prompt:\n" << prompt.text << "\n\nOutput:\n" << rollout.text << "\n\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "gold=%s format=%.2f validity=%.2f correctness=%.2f total=%.2f\n",
                  prompt.gold_label.c_str(), reward.format, reward.validity, reward.correctness, reward.total);
    out << buf;
    return 0;
  });
}

int cmd_gendata(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(options);
    const DatasetSplits splits = prepare_splits(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    Dataset all = splits.train;
    all.records.clear();
    all.split = SplitTag::kAll;
    for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
      all.records.insert(all.records.end(), part->records.begin(), part->records.end());
    }
    const std::pair<const Dataset*, std::string_view> parts[] = {
        {&all, "all"}, {&splits.train, "train"}, {&splits.val, "val"}, {&splits.test, "test"}};
    for (const auto& [dataset, name] : parts) {
      const auto path = cfg.out_dir / (cfg.task_id + "_" + std::string(name) + ".csv");
      std::ofstream file(path);
      if (!file) fail(ErrorCode::kIo, "cannot write " + path.string());
      write_csv(file, *dataset);
      out << path.string() << ": " << dataset->size() << " rows\n";
    }
    return 0;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GRPO training of a tag-structured policy for tabular prediction", "tabgrpo"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string out_dir;
  std::uint64_t seed = 0;
  EvalOptions eval;
  SampleOptions sample_options;
  std::string checkpoint;
  std::string dataset;
  int top_k = 0;
  double temperature = 0.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "Run config (JSON)")->required();
    cmd->add_option("--out", out_dir, "Output directory (overrides config)");
    cmd->add_option("--seed", seed, "Seed override");
  };
  auto add_eval = [&](CLI::App* cmd) {
    add_common(cmd);
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    cmd->add_option("--dataset", dataset, "Task id (must match the config)");
    cmd->add_option("--split", eval.split, "train, val, test or all");
    cmd->add_option("--top-k", top_k, "Sampler top-k override");
    cmd->add_option("--temperature", temperature, "Sampler temperature override");
  };

  auto* train_cmd = app.add_subcommand("train", "Train with GRPO");
  add_common(train_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_eval(eval_cmd);
  auto* sample_cmd = app.add_subcommand("sample", "Print one prompt and its sampled response");
  add_eval(sample_cmd);
  sample_cmd->add_option("--index", sample_options.index, "Record index within the split");
  auto* gen_cmd = app.add_subcommand("gen-data", "Write the configured dataset as CSV");
  add_common(gen_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto finish_common = [&](CLI::App* cmd) {
    if (cmd->count("--out")) common.out_dir = out_dir;
    if (cmd->count("--seed")) common.seed = seed;
  };
  auto finish_eval = [&](CLI::App* cmd) {
    finish_common(cmd);
    eval.common = common;
    eval.checkpoint = checkpoint;
    if (cmd->count("--dataset")) eval.dataset = dataset;
    if (cmd->count("--top-k")) eval.top_k = top_k;
    if (cmd->count("--temperature")) eval.temperature = temperature;
  };

  if (train_cmd->parsed()) {
    finish_common(train_cmd);
    return cmd_train(common, out, err);
  }
  if (eval_cmd->parsed()) {
    finish_eval(eval_cmd);
    return cmd_eval(eval, out, err);
  }
  if (sample_cmd->parsed()) {
    finish_eval(sample_cmd);
    sample_options.eval = eval;
    return cmd_sample(sample_options, out, err);
  }
  finish_common(gen_cmd);
  return cmd_gendata(common, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("tabgrpo");
  for (const auto& arg : args) argv.push_back(arg.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tabgrpo::cli
