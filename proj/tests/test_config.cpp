#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "primesh/config/config.hpp"

using namespace primesh;

namespace {

std::string dump(const RunConfig& c) {
  std::ostringstream out;
  write_config(c, out);
  return out.str();
}

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config defaults are the full-scale values") {
  const RunConfig c;
  CHECK(c.resolution == 64);
  CHECK(c.prim.episode_steps == 300);
  CHECK(c.mesh.episode_steps == 100);
  CHECK(c.training.loss.gamma == doctest::Approx(0.9));
  CHECK(c.training.loss.margin == doctest::Approx(0.8));
  CHECK(c.training.loss.lambda == doctest::Approx(1.0));
  CHECK(c.training.learning_rate == doctest::Approx(8e-5));
  CHECK(c.training.batch_size == 64);
  CHECK(c.training.dagger_iterations == 4);
  CHECK(c.training.target_sync_interval == 4000);
  CHECK(c.training.demo_capacity == 200000);
  CHECK(c.training.self_capacity == 100000);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("config round trips through write_config") {
  RunConfig c;
  c.resolution = 32;
  c.prim.alpha_local = 0.125;
  c.network.conv_channels = {3, 5, 7};
  c.network.head_hidden = {33, 17};
  c.training.learning_rate = 1.0 / 3.0;
  c.training.seed = 18446744073709551615ULL;
  c.run_dir = "runs/with space";
  const std::string text = dump(c);
  std::istringstream in(text);
  const RunConfig back = parse_config(in);
  CHECK(dump(back) == text);
  CHECK(back.training.learning_rate == c.training.learning_rate);
  CHECK(back.training.seed == c.training.seed);
  CHECK(back.network.conv_channels == c.network.conv_channels);
  CHECK(back.run_dir == "runs/with space");
}

TEST_CASE("config keeps defaults for absent keys and ignores comments") {
  const RunConfig c = parse("# header\n[training]\nbatch_size = 16   # small\n\n[network]\nstep_hidden=9\n");
  CHECK(c.training.batch_size == 16);
  CHECK(c.network.step_hidden == 9);
  CHECK(c.resolution == 64);
  CHECK(c.training.dagger_iterations == 4);
}

TEST_CASE("config errors name the line") {
  CHECK(parse_error("[training]\nbatch_size = 16\nbogus = 1\n").find("line 3") != std::string::npos);
  CHECK(parse_error("[training]\nbogus = 1\n").find("unknown key 'bogus'") != std::string::npos);
  CHECK(parse_error("[nope]\n").find("unknown section [nope]") != std::string::npos);
  CHECK(parse_error("batch_size = 1\n").find("outside any section") != std::string::npos);
  CHECK(parse_error("[training\n").find("unterminated") != std::string::npos);
  CHECK(parse_error("[training]\nbatch_size\n").find("key = value") != std::string::npos);
  const std::string bad = parse_error("[geometry]\n\nresolution = 6x4\n");
  CHECK(bad.find("line 3") != std::string::npos);
  CHECK(bad.find("geometry.resolution") != std::string::npos);
  CHECK(parse_error("[network]\nconv_channels = 1,2\n").find("needs 3") != std::string::npos);
  CHECK(parse_error("[network]\nconv_channels = 1,2,3,4\n").find("more than 3") != std::string::npos);
  CHECK(parse_error("[training]\nbatch_size = 2.5\n").find("line 2") != std::string::npos);
}

TEST_CASE("config overrides") {
  RunConfig c;
  apply_override(c, "training.rl_learning_rate=2e-5");
  apply_override(c, "network.param_hidden=4,3");
  apply_override(c, "paths.run_dir=runs/x");
  CHECK(c.training.rl_learning_rate == doctest::Approx(2e-5));
  CHECK(c.network.param_hidden == std::array<int, 2>{4, 3});
  CHECK(c.run_dir == "runs/x");
  CHECK_THROWS_AS(apply_override(c, "training.batch_size"), FormatError);
  CHECK_THROWS_AS(apply_override(c, "batch_size=2"), FormatError);
  CHECK_THROWS_AS(apply_override(c, "training.nope=2"), FormatError);
  CHECK_THROWS_AS(apply_override(c, "training.batch_size=x"), FormatError);
}

TEST_CASE("config validation rejects out-of-range values") {
  auto rejects = [](auto mutate) {
    RunConfig c;
    mutate(c);
    CHECK_THROWS_AS(validate(c), ContractViolation);
  };
  rejects([](RunConfig& c) { c.resolution = 4; });
  rejects([](RunConfig& c) { c.resolution = 129; });
  rejects([](RunConfig& c) { c.network.reference_pool = 3; });
  rejects([](RunConfig& c) { c.training.batch_size = 7; });
  rejects([](RunConfig& c) { c.training.epsilon = 1.5; });
  rejects([](RunConfig& c) { c.training.loss.gamma = -0.1; });
  rejects([](RunConfig& c) { c.training.learning_rate = 0; });
  rejects([](RunConfig& c) { c.training.rl_update_interval = 0; });
  rejects([](RunConfig& c) { c.run_dir.clear(); });
}

TEST_CASE("run directory resolves against the run root") {
  RunConfig c;
  c.run_dir = "runs/a";
  ::setenv("PRIMESH_RUN_ROOT", "/tmp/primesh-root", 1);
  CHECK(resolve_run_dir(c) == std::filesystem::path("/tmp/primesh-root/runs/a"));
  c.run_dir = "/abs/dir";
  CHECK(resolve_run_dir(c) == std::filesystem::path("/abs/dir"));
  ::unsetenv("PRIMESH_RUN_ROOT");
  c.run_dir = "runs/a";
  CHECK(resolve_run_dir(c) == std::filesystem::current_path() / "runs/a");
}
