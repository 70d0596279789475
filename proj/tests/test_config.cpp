#include "synthetic.hpp"

#include "ctlab/config.hpp"
#include "ctlab/error.hpp"
#include "ctlab/util.hpp"

#include <doctest.h>

#include <map>

using namespace ctlab;

namespace {

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST_CASE("run config files") {
  auto dir = testing::temp_dir("cfg");
  write_file(dir / "run.ini",
             "seed = 7\n"
             "[paths]\n"
             "corpus = \"data/corpus.jsonl\"\n"
             "output_dir = /abs/out\n"
             "encoders = enc\n"
             "[model]\n"
             "encoder_id = tiny\n"
             "epochs = 12\n"
             "learning_rate = 1e-4\n"
             "use_class_weights = false\n"
             "[run]\n"
             "threshold = 0.6\n");
  const auto c = load_run_config(dir / "run.ini");
  CHECK(c.seed == 7);
  CHECK(c.corpus == dir / "data/corpus.jsonl");
  CHECK(c.output_dir == "/abs/out");
  REQUIRE(c.encoder_roots.size() == 1);
  CHECK(c.encoder_roots[0] == dir / "enc");
  CHECK(c.model.epochs == 12);
  CHECK(c.model.learning_rate == 1e-4);
  CHECK_FALSE(c.model.use_class_weights);
  CHECK(c.model.batch_size == 32);
  CHECK(c.threshold == 0.6);

  write_file(dir / "typo.ini", "[model]\nepoch = 3\n");
  CHECK_THROWS_AS(load_run_config(dir / "typo.ini"), ConfigError);
  write_file(dir / "nan.ini", "[model]\nepochs = many\n");
  CHECK_THROWS_AS(load_run_config(dir / "nan.ini"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "absent.ini"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("environment overrides") {
  RunConfig c;
  apply_env(c, fake_env({{"CTLAB_EPOCHS", "3"}, {"CTLAB_CORPUS", "/x.jsonl"}, {"CTLAB_SEED", "11"}}));
  CHECK(c.model.epochs == 3);
  CHECK(c.corpus == "/x.jsonl");
  CHECK(c.seed == 11);
  CHECK_THROWS_AS(apply_env(c, fake_env({{"CTLAB_BATCH_SIZE", "lots"}})), ConfigError);
}

TEST_CASE("missing paths are reported together") {
  auto dir = testing::temp_dir("paths");
  write_file(dir / "here.txt", "x");
  const std::vector<std::pair<std::string, std::filesystem::path>> paths = {
      {"corpus", dir / "gone.jsonl"}, {"stopwords", dir / "here.txt"}, {"emoji map", dir / "gone.json"}, {"unset", {}}};
  CHECK(missing_paths(paths).size() == 2);
  try {
    require_paths(paths);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("gone.jsonl") != std::string::npos);
    CHECK(msg.find("gone.json") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("shipped example configs load") {
  const std::filesystem::path configs = std::filesystem::path(CTLAB_SOURCE_DIR) / "configs";
  const auto c = load_run_config(configs / "run.example.ini");
  CHECK(c.model.learning_rate == 2e-5);
  CHECK(c.model.patience == 2);
  CHECK(c.stopwords.filename() == "stopwords_bn.txt");
  CHECK(std::filesystem::exists(c.stopwords));
}
