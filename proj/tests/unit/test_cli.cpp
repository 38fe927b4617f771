#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "tabgrpo/checkpoint.hpp"
#include "tabgrpo/cli.hpp"
#include "tabgrpo/config.hpp"
#include "tabgrpo/dataset.hpp"

using namespace tabgrpo;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::filesystem::path write_config(const std::filesystem::path& dir, const std::string& extra = "") {
  const auto path = dir / "config.json";
  std::ofstream(path) << R"({
  "seed": 3,
  "out_dir": ")" << (dir / "run").string()
                      << R"(",
  "task.id": "threshold",
  "data.features": ["income", "debt"],
  "data.synthetic.rule": "threshold",
  "data.synthetic.rule_features": ["income"],
  "data.synthetic.decimals": 1,
  "data.synthetic.n": 40,
  "policy.embed_dim": 4,
  "policy.hidden_dim": 8,
  "policy.prompt_window": 4,
  "policy.output_window": 2,
  "policy.max_positions": 8,
  "grpo.group_size": 4,
  "grpo.epochs": 2,
  "grpo.prompts_per_step": 8,
  "sampler.train.max_len": 8,
  "sampler.eval.max_len": 8)"
                      << extra << "\n}\n";
  return path;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// Drops the trailing wall_seconds column.
std::string without_wall_time(const std::string& row) { return row.substr(0, row.rfind(',')); }

// Greedy decoding of these parameters yields
// "<reasoning> </reasoning> <answer> good </answer>" and then end of sequence.
PolicyParams scripted_policy(const Vocab& vocab) {
  Architecture arch;
  arch.vocab_size = static_cast<int>(vocab.size());
  arch.embed_dim = 2;
  arch.prompt_window = 2;
  arch.output_window = 1;
  arch.hidden_dim = 6;
  arch.max_positions = 6;
  PolicyParams p;
  p.arch = arch;
  p.theta.assign(arch.param_count(), 0.0);
  const auto layout = ParamLayout::of(arch);
  const TokenId script[] = {token::kReasoningOpen, token::kReasoningClose, token::kAnswerOpen,
                            *vocab.id_of("good"), token::kAnswerClose, token::kEos};
  const auto h = static_cast<std::size_t>(arch.hidden_dim);
  for (std::size_t t = 0; t < 6; ++t) {
    p.theta[layout.positions + t * h + t] = 3.0;
    p.theta[layout.w2 + static_cast<std::size_t>(script[t]) * h + t] = 20.0;
  }
  return p;
}

}  // namespace

TEST_CASE("train writes one metrics row per epoch and checkpoints that load") {
  const auto dir = test_support::temp_dir("cli_train");
  const auto cfg = write_config(dir, R"(, "grpo.epochs": 1)");
  const auto r = run_cli({"train", "--config", cfg.string()});
  REQUIRE(r.status == 0);
  CHECK(r.out.find("best epoch 1 test:") != std::string::npos);
  const auto rows = read_lines(dir / "run" / "metrics.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == cli::kMetricsHeader);
  CHECK(rows[1].rfind("1,val,", 0) == 0);
  CHECK(load_checkpoint(dir / "run" / "checkpoints" / "epoch_001.ckpt").epoch == 1);
  const auto best = read_lines(dir / "run" / "best_epoch.txt");
  REQUIRE(best.size() == 2);
  CHECK(best[0] == "epoch 1");
}

TEST_CASE("same seed reproduces the metrics") {
  const auto a = test_support::temp_dir("cli_repro_a");
  const auto b = test_support::temp_dir("cli_repro_b");
  REQUIRE(run_cli({"train", "--config", write_config(a).string()}).status == 0);
  REQUIRE(run_cli({"train", "--config", write_config(b).string()}).status == 0);
  const auto rows_a = read_lines(a / "run" / "metrics.csv");
  const auto rows_b = read_lines(b / "run" / "metrics.csv");
  REQUIRE(rows_a.size() == 3);
  REQUIRE(rows_a.size() == rows_b.size());
  for (std::size_t i = 1; i < rows_a.size(); ++i) {
    CHECK(without_wall_time(rows_a[i]) == without_wall_time(rows_b[i]));
    CHECK(rows_a[i].rfind(std::to_string(i) + ",", 0) == 0);
  }
  for (const int epoch : {1, 2}) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
    const auto ca = load_checkpoint(a / "run" / "checkpoints" / name);
    const auto cb = load_checkpoint(b / "run" / "checkpoints" / name);
    CHECK(ca.params.theta == cb.params.theta);
    const auto e = run_cli({"eval", "--config", (a / "config.json").string(), "--checkpoint",
                            (a / "run" / "checkpoints" / name).string(), "--split", "val"});
    CHECK(e.status == 0);
  }
  const auto other = test_support::temp_dir("cli_repro_c");
  REQUIRE(run_cli({"train", "--config", write_config(other).string(), "--seed", "4"}).status == 0);
  CHECK(read_lines(other / "run" / "metrics.csv") != rows_a);
}

TEST_CASE("zero time budget stops cleanly") {
  const auto dir = test_support::temp_dir("cli_budget");
  const auto r = run_cli({"train", "--config", write_config(dir, R"(, "grpo.time_budget_seconds": 0)").string()});
  CHECK(r.status == 0);
  CHECK(r.out.find("time budget exhausted") != std::string::npos);
  CHECK(read_lines(dir / "run" / "metrics.csv").size() == 1);
}

TEST_CASE("scripted policy evaluates to perfect scores") {
  const auto dir = test_support::temp_dir("cli_oracle");
  const auto cfg_path = write_config(dir, R"(, "data.synthetic.balance": 1.0)");
  const auto cfg = load_run_config(cfg_path);
  const auto splits = prepare_splits(cfg);
  for (const auto& rec : splits.test.records) REQUIRE(rec.label == "good");
  Checkpoint ckpt;
  ckpt.epoch = 9;
  ckpt.vocab = build_run_vocab(cfg, splits.train);
  ckpt.params = scripted_policy(ckpt.vocab);
  save_checkpoint(dir / "oracle.ckpt", ckpt);

  const std::vector<std::string> eval = {"eval", "--config", cfg_path.string(), "--checkpoint",
                                         (dir / "oracle.ckpt").string(), "--top-k", "1"};
  const auto first = run_cli(eval);
  REQUIRE(first.status == 0);
  const auto second = run_cli(eval);
  std::istringstream lines(first.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == cli::kMetricsHeader);
  CHECK(row.rfind("9,test,2.", 0) == 0);
  std::vector<std::string> cols;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  REQUIRE(cols.size() == 10);
  CHECK(std::stod(cols[3]) == 1.0);
  CHECK(std::stod(cols[5]) == 1.0);
  CHECK(std::stod(cols[6]) == 1.0);
  CHECK(without_wall_time(row) == without_wall_time(second.out.substr(second.out.find('\n') + 1)));
  CHECK(read_lines(dir / "run" / "eval.csv").size() == 3);

  const auto s = run_cli({"sample", "--config", cfg_path.string(), "--checkpoint",
                          (dir / "oracle.ckpt").string(), "--index", "0", "--temperature", "0.1"});
  REQUIRE(s.status == 0);
  CHECK(s.out.rfind("Input Prompt:\n", 0) == 0);
  CHECK(s.out.find("\n\nOutput:\n<reasoning> </reasoning> <answer> good </answer>\n") != std::string::npos);
  CHECK(s.out.find("total=2.00") != std::string::npos);
}

TEST_CASE("command failures give a nonzero status") {
  const auto dir = test_support::temp_dir("cli_fail");
  const auto cfg = write_config(dir).string();
  CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", (dir / "absent.ckpt").string()}).status != 0);
  CHECK(run_cli({"train", "--config", (dir / "absent.json").string()}).status != 0);
  CHECK(run_cli({"bogus"}).status != 0);

  Checkpoint ckpt;
  const auto run_cfg = load_run_config(cfg);
  ckpt.vocab = build_run_vocab(run_cfg, prepare_splits(run_cfg).train);
  ckpt.params = scripted_policy(ckpt.vocab);
  save_checkpoint(dir / "c.ckpt", ckpt);
  const auto ck = (dir / "c.ckpt").string();
  CHECK(run_cli({"sample", "--config", cfg, "--checkpoint", ck, "--index", "100000"}).status != 0);
  CHECK(run_cli({"sample", "--config", cfg, "--checkpoint", ck, "--index", "-1"}).status != 0);
  CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", ck, "--dataset", "german"}).status != 0);
  CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", ck, "--split", "nope"}).status != 0);
  CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", ck, "--dataset", "threshold"}).status == 0);
}

TEST_CASE("gen-data writes the configured rows") {
  const auto dir = test_support::temp_dir("cli_gen");
  const auto cfg_path = write_config(dir);
  const auto r = run_cli({"gen-data", "--config", cfg_path.string()});
  REQUIRE(r.status == 0);
  const auto cfg = load_run_config(cfg_path);
  const auto all = load_csv(dir / "run" / "threshold_all.csv", cfg.schema());
  CHECK(all.size() == 40);
  for (const auto& rec : all.records) {
    const double income = std::stod(rec.values[0]);
    CHECK(rec.label == (income > 0.5 ? "good" : "bad"));
  }
  std::size_t parts = 0;
  for (const char* name : {"train", "val", "test"}) {
    parts += load_csv(dir / "run" / (std::string("threshold_") + name + ".csv"), cfg.schema()).size();
  }
  CHECK(parts == 40);
  REQUIRE(run_cli({"gen-data", "--config", cfg_path.string(), "--out", (dir / "again").string()}).status == 0);
  CHECK(test_support::read_text(dir / "again" / "threshold_all.csv") ==
        test_support::read_text(dir / "run" / "threshold_all.csv"));
}
