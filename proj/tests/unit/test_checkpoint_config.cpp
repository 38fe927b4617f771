#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "tabgrpo/checkpoint.hpp"
#include "tabgrpo/config.hpp"

using namespace tabgrpo;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kContract;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.epoch = 3;
  c.config_digest = "0123456789abcdef";
  const std::vector<std::string> corpus = {"income is 0.3", "debt is 0.7"}, labels = {"good", "bad"};
  c.vocab = Vocab::build(corpus, 32, labels);
  Rng rng(4);
  auto arch = test_support::tiny_arch(static_cast<int>(c.vocab.size()));
  c.params = test_support::random_params(arch, rng);
  c.params.theta[0] = 1.0 / 3.0;
  c.params.theta[1] = -0.0;
  c.params.theta[2] = 1e-300;
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  const auto c = sample_checkpoint();
  std::stringstream buf;
  write_checkpoint(buf, c);
  const auto back = read_checkpoint(buf);
  CHECK(back.epoch == 3);
  CHECK(back.config_digest == c.config_digest);
  CHECK(back.vocab.tokens() == c.vocab.tokens());
  CHECK(back.params.arch.vocab_size == c.params.arch.vocab_size);
  CHECK(back.params.arch.hidden_dim == c.params.arch.hidden_dim);
  CHECK(back.params.arch.max_positions == c.params.arch.max_positions);
  REQUIRE(back.params.theta.size() == c.params.theta.size());
  for (std::size_t i = 0; i < c.params.theta.size(); ++i) CHECK(back.params.theta[i] == c.params.theta[i]);
  CHECK(std::signbit(back.params.theta[1]));

  const auto dir = test_support::temp_dir("ckpt");
  save_checkpoint(dir / "a.ckpt", c);
  CHECK(load_checkpoint(dir / "a.ckpt").params.theta == c.params.theta);
}

TEST_CASE("bad checkpoints are rejected") {
  const auto dir = test_support::temp_dir("ckpt_bad");
  CHECK(code_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::kIo);

  std::stringstream buf;
  write_checkpoint(buf, sample_checkpoint());
  const std::string full = buf.str();
  for (const std::size_t cut : {std::size_t{0}, std::size_t{10}, full.size() / 2, full.size() - 1}) {
    CAPTURE(cut);
    std::istringstream in(full.substr(0, cut));
    CHECK(code_of([&] { read_checkpoint(in); }) == ErrorCode::kIo);
  }
  std::string wrong = full;
  wrong.replace(0, 18, "not-a-checkpoint 1");
  std::istringstream in(wrong);
  CHECK(code_of([&] { read_checkpoint(in); }) == ErrorCode::kIo);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_run_config(R"({"seed": 5, "grpo.group_size": 4, "task.labels": ["yes", "no"]})", ".");
  CHECK(cfg.seed == 5);
  CHECK(cfg.train.grpo.group_size == 4);
  CHECK(cfg.labels == std::vector<std::string>{"yes", "no"});
  CHECK(cfg.train.grpo.clip_eps == 0.2);
  CHECK(cfg.train.grpo.kl_beta == 0.04);

  CHECK(code_of([] { parse_run_config(R"({"grpo.gruop_size": 4})", "."); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_run_config(R"({"seed": "seven"})", "."); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_run_config("[1, 2]", "."); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_run_config("{", "."); }) == ErrorCode::kConfig);
  CHECK(code_of([] { parse_run_config(R"({"task.labels": ["only"]})", "."); }) == ErrorCode::kConfig);
  CHECK(code_of([] {
          parse_run_config(R"({"data.source": "csv", "data.csv": "nope.csv", "data.features": ["a"]})", ".");
        }) == ErrorCode::kConfig);

  const auto csv = parse_run_config(R"({"data.source": "csv", "data.csv": "german_train.csv",
                                       "data.features": ["x"]})",
                                    TABGRPO_FIXTURES);
  CHECK(csv.csv_path == test_support::fixture("german_train.csv"));
}

TEST_CASE("canonical rendering round trips") {
  const auto cfg = load_run_config(std::filesystem::path(TABGRPO_FIXTURES) / ".." / ".." / "configs" /
                                   "threshold.json");
  const auto text = to_json_text(cfg);
  const auto back = parse_run_config(text, ".");
  CHECK(to_json_text(back) == text);
  CHECK(config_digest(back) == config_digest(cfg));
  CHECK(config_digest(cfg).size() == 16);
  auto other = cfg;
  other.seed += 1;
  CHECK(config_digest(other) != config_digest(cfg));
}

TEST_CASE("output directory override") {
  const auto dir = test_support::temp_dir("cfg_env");
  const auto path = dir / "c.json";
  std::ofstream(path) << R"({"out_dir": "somewhere"})";
  ::unsetenv("TABGRPO_OUT");
  CHECK(load_run_config(path).out_dir == "somewhere");
  ::setenv("TABGRPO_OUT", (dir / "elsewhere").c_str(), 1);
  CHECK(load_run_config(path).out_dir == dir / "elsewhere");
  ::unsetenv("TABGRPO_OUT");
  CHECK(code_of([&] { load_run_config(dir / "absent.json"); }) == ErrorCode::kConfig);
}

TEST_CASE("run splits and vocabulary") {
  const auto cfg = load_run_config(std::filesystem::path(TABGRPO_FIXTURES) / ".." / ".." / "configs" /
                                   "threshold.json");
  const auto splits = prepare_splits(cfg);
  CHECK(splits.train.records.size() == 420);
  CHECK(splits.val.records.size() == 60);
  CHECK(splits.test.records.size() == 120);
  const auto vocab = build_run_vocab(cfg, splits.train);
  CHECK(vocab.size() == 27);
  CHECK(vocab.id_of("good").has_value());
  CHECK(vocab.id_of("bad").has_value());
}
