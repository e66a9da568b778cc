#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bathy/forward_model.hpp"
#include "bathy/synthetic.hpp"
#include "cli.hpp"

using namespace bathy;
namespace fs = std::filesystem;

namespace {

int bathy_run(std::initializer_list<std::string> args) {
  std::vector<const char*> argv{"bathy"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path root = fs::temp_directory_path() / ("bathy_cli_" + std::to_string(::getpid()));
  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string at(const std::string& sub) const { return (root / sub).string(); }
};

// Three 8x10 surveys and a 12-sample dataset built from them.
void small_dataset(const Workspace& ws, const std::string& name = "d") {
  REQUIRE(bathy_run({"make-base-surveys", "--rows", "8", "--cols", "10", "--width", "80", "--length", "100",
                     "--count", "3", "--seed", "1", "--out", ws.at("s")}) == 0);
  REQUIRE(bathy_run({"generate", "--surveys", ws.at("s"), "--per-survey", "4", "--jump-fraction", "0.5", "--seed",
                     "1", "--out", ws.at(name)}) == 0);
}

}  // namespace

TEST_CASE("generate writes per-survey x surveys pairs with no jumps at fraction 0") {
  Workspace ws;
  REQUIRE(bathy_run({"make-base-surveys", "--rows", "8", "--cols", "10", "--count", "3", "--seed", "4", "--out",
                     ws.at("s")}) == 0);
  REQUIRE(bathy_run({"generate", "--surveys", ws.at("s"), "--per-survey", "4", "--jump-fraction", "0", "--seed", "1",
                     "--out", ws.at("d")}) == 0);
  const TrainingDataset ds = read_dataset(ws.at("d"));
  CHECK(ds.size() == 12);
  for (const auto& info : ds.info) CHECK_FALSE(info.jumped);
  CHECK(fs::exists(ws.at("d/config.json")));
  CHECK(fs::exists(ws.at("d/prior_mean.field")));
}

TEST_CASE("generate twice gives byte-identical manifests, also with a thread cap") {
  Workspace ws;
  small_dataset(ws, "a");
  REQUIRE(bathy_run({"--threads", "1", "generate", "--surveys", ws.at("s"), "--per-survey", "4", "--jump-fraction",
                     "0.5", "--seed", "1", "--out", ws.at("b")}) == 0);
  CHECK(slurp(ws.at("a/manifest.txt")) == slurp(ws.at("b/manifest.txt")));
  CHECK(slurp(ws.at("a/dataset.bin")) == slurp(ws.at("b/dataset.bin")));
}

TEST_CASE("estimate kriging returns the prior mean when y = H mu") {
  Workspace ws;
  const GridSpec grid(8, 10, 80.0, 100.0);
  const Field mu = make_base_surveys(grid, 1, 3).front();
  write_field(fs::path(ws.at("mu.field")), mu);
  const ObservationModel model = ObservationModel::from_layout(default_layout(grid), grid);
  write_observations(fs::path(ws.at("y.obs")),
                     {model.point_count(), model.forward() * mu.values(), model.noise_variance()});
  REQUIRE(bathy_run({"estimate", "--method", "kriging", "--prior-mean", ws.at("mu.field"), "--observations",
                     ws.at("y.obs"), "--reference", ws.at("mu.field"), "--out", ws.at("e")}) == 0);
  const Field est = read_field(fs::path(ws.at("e/estimate.field")));
  CHECK((est.values() - mu.values()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(fs::exists(ws.at("e/std.csv")));
}

TEST_CASE("estimate dnn-kriging emits dnn and corrected fields") {
  Workspace ws;
  small_dataset(ws);
  REQUIRE(bathy_run({"train", "--dataset", ws.at("d"), "--hidden", "6", "--epochs", "2", "--seed", "3", "--out",
                     ws.at("m")}) == 0);
  REQUIRE(bathy_run({"make-base-surveys", "--rows", "8", "--cols", "10", "--width", "80", "--length", "100",
                     "--count", "1", "--seed", "9", "--out", ws.at("t")}) == 0);
  REQUIRE(bathy_run({"benchmark", "--prior-mean", ws.at("d/prior_mean.field"), "--test-surveys", ws.at("t"),
                     "--count", "2", "--checkpoint", ws.at("m/checkpoint.bin"), "--realizations", "10", "--seed",
                     "5", "--out", ws.at("b")}) == 0);
  CHECK(fs::exists(ws.at("b/report.csv")));
  REQUIRE(bathy_run({"estimate", "--method", "dnn-kriging", "--prior-mean", ws.at("d/prior_mean.field"),
                     "--observations", ws.at("b/observations/t00.obs"), "--checkpoint", ws.at("m/checkpoint.bin"),
                     "--out", ws.at("e")}) == 0);
  CHECK(fs::exists(ws.at("e/dnn.field")));
  CHECK(fs::exists(ws.at("e/corrected.field")));
  CHECK(fs::exists(ws.at("e/std.csv")));
}

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(bathy_run({"estimate", "--method", "bogus", "--out", ws.at("e")}) == 2);
  CHECK(bathy_run({"no-such-command"}) == 2);
  CHECK(bathy_run({}) == 2);
  CHECK(bathy_run({"generate", "--jump-fraction", "1.5", "--surveys", ws.at("s"), "--out", ws.at("d")}) == 2);
  CHECK(bathy_run({"estimate", "--method", "kriging", "--out", ws.at("e")}) == 2);
  CHECK(bathy_run({"generate", "--help"}) == 0);
  // Missing inputs at run time.
  CHECK(bathy_run({"generate", "--surveys", ws.at("nothing-here"), "--out", ws.at("d")}) == 1);

  small_dataset(ws);
  std::ofstream(ws.at("junk.bin")) << "not a checkpoint";
  CHECK(bathy_run({"train", "--dataset", ws.at("d"), "--hidden", "4", "--epochs", "1", "--out", ws.at("m")}) == 0);
  CHECK(bathy_run({"estimate", "--method", "kriging", "--prior-mean", ws.at("d/prior_mean.field"), "--observations",
                   ws.at("missing.obs"), "--out", ws.at("e")}) == 1);
  const Field mu = read_field(fs::path(ws.at("d/prior_mean.field")));
  const ObservationModel model = ObservationModel::from_layout(default_layout(mu.grid()), mu.grid());
  write_observations(fs::path(ws.at("y.obs")),
                     {model.point_count(), model.forward() * mu.values(), model.noise_variance()});
  CHECK(bathy_run({"estimate", "--method", "dnn", "--prior-mean", ws.at("d/prior_mean.field"), "--observations",
                   ws.at("y.obs"), "--checkpoint", ws.at("junk.bin"), "--out", ws.at("e")}) == 1);
  CHECK(bathy_run({"estimate", "--method", "dnn", "--prior-mean", ws.at("d/prior_mean.field"), "--observations",
                   ws.at("y.obs"), "--checkpoint", ws.at("m/checkpoint.bin"), "--out", ws.at("e")}) == 0);
}

TEST_CASE("resolved config round-trips") {
  Workspace ws;
  small_dataset(ws);
  REQUIRE(bathy_run({"generate", "--config", ws.at("d/config.json"), "--out", ws.at("d2")}) == 0);
  CHECK(slurp(ws.at("d/manifest.txt")) == slurp(ws.at("d2/manifest.txt")));
  CHECK(slurp(ws.at("d/dataset.bin")) == slurp(ws.at("d2/dataset.bin")));

  REQUIRE(bathy_run({"train", "--dataset", ws.at("d"), "--hidden", "5", "3", "--epochs", "3", "--activation", "tanh",
                     "--seed", "8", "--out", ws.at("m")}) == 0);
  REQUIRE(bathy_run({"train", "--config", ws.at("m/config.json"), "--out", ws.at("m2")}) == 0);
  CHECK(slurp(ws.at("m/checkpoint.bin")) == slurp(ws.at("m2/checkpoint.bin")));
  CHECK(slurp(ws.at("m/loss.csv")) == slurp(ws.at("m2/loss.csv")));

  // Profile defaults are written out explicitly.
  REQUIRE(bathy_run({"train", "--dataset", ws.at("d"), "--epochs", "0", "--out", ws.at("m3")}) == 0);
  const std::string cfg = slurp(ws.at("m3/config.json"));
  CHECK(cfg.find("\"hidden\": [\n    256,\n    256\n  ]") != std::string::npos);
}

TEST_CASE("config files with unknown keys or a different command are rejected") {
  Workspace ws;
  std::ofstream(ws.at("unknown.json")) << R"({"command": "generate", "surveys": "s", "jumps": 3})";
  CHECK(bathy_run({"generate", "--config", ws.at("unknown.json")}) == 2);
  std::ofstream(ws.at("other.json")) << R"({"command": "train", "dataset": "d"})";
  CHECK(bathy_run({"generate", "--config", ws.at("other.json")}) == 2);
  std::ofstream(ws.at("broken.json")) << "{ not json";
  CHECK(bathy_run({"generate", "--config", ws.at("broken.json")}) == 2);
  std::ofstream(ws.at("badvalue.json")) << R"({"command": "generate", "format": "xml"})";
  CHECK(bathy_run({"generate", "--config", ws.at("badvalue.json")}) == 2);
}

TEST_CASE("path options take environment overrides, flags win") {
  Workspace ws;
  ::setenv("BATHY_OUT", ws.at("from-env").c_str(), 1);
  CHECK(bathy_run({"make-base-surveys", "--rows", "4", "--cols", "5", "--count", "2"}) == 0);
  CHECK(fs::exists(ws.at("from-env/survey_0001.field")));
  CHECK(bathy_run({"make-base-surveys", "--rows", "4", "--cols", "5", "--count", "2", "--out", ws.at("flag")}) == 0);
  CHECK(fs::exists(ws.at("flag/survey_0000.field")));
  ::unsetenv("BATHY_OUT");
  // Non-path options ignore the environment.
  ::setenv("BATHY_COUNT", "7", 1);
  CHECK(bathy_run({"make-base-surveys", "--rows", "4", "--cols", "5", "--out", ws.at("n")}) == 0);
  CHECK(fs::exists(ws.at("n/survey_0238.field")));
  ::unsetenv("BATHY_COUNT");
}
