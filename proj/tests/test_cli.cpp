#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "primesh/data/dataset.hpp"
#include "primesh/geometry/voxg.hpp"
#include "primesh/pipeline/pipeline.hpp"

using namespace primesh;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const char* const kTinyConfig = R"([geometry]
resolution = 16
chamfer_samples = 256
[env]
prim_episode_steps = 20
mesh_episode_steps = 10
[network]
reference_pool = 16
conv_channels = 2,2,2
conv_kernels = 3,3,3
param_hidden = 8,8
step_hidden = 4
head_hidden = 16,8
[training]
learning_rate = 1e-3
batch_size = 8
dagger_iterations = 2
updates_per_iteration = 5
target_sync_interval = 3
demo_capacity = 5000
self_capacity = 5000
rl_warmup = 10
[paths]
dataset = data/train
eval_dataset = data/eval
run_dir = runs/tiny
)";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI inside `dir` with the tiny configuration.
class Workspace {
 public:
  explicit Workspace(const std::string& name) : dir_(fs::temp_directory_path() / ("primesh-cli-" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.cfg") << kTinyConfig;
  }

  Result run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" PRIMESH_CLI "' --config tiny.cfg " + args +
                            " > out.txt 2> err.txt";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "out.txt");
    r.err = slurp(dir_ / "err.txt");
    fs::remove(dir_ / "out.txt");
    fs::remove(dir_ / "err.txt");
    return r;
  }

  const fs::path& dir() const { return dir_; }

  std::vector<std::string> listing() const {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  fs::path dir_;
};

Json error_line(const Result& r) {
  REQUIRE_FALSE(r.err.empty());
  const auto last = r.err.find_last_not_of('\n');
  const auto start = r.err.rfind('\n', last);
  return Json::parse(r.err.substr(start == std::string::npos ? 0 : start + 1, last + 1));
}

}  // namespace

TEST_CASE("cli dry runs print the plan and touch nothing") {
  Workspace w("dry");
  const auto before = w.listing();
  const Result r = w.run("--dry-run gen-data --count 3 --seed 4");
  CHECK(r.code == 0);
  const Json plan = Json::parse(r.out);
  CHECK(plan["command"] == "gen-data");
  CHECK(plan["dry_run"] == true);
  CHECK(plan["writes"][0] == "data/train");
  CHECK(plan["config"]["geometry"]["resolution"] == "16");
  CHECK(w.listing() == before);

  REQUIRE(w.run("gen-data --count 3 --seed 4").code == 0);
  const auto with_data = w.listing();
  const Result train = w.run("--dry-run train-prim --scheme dagger_star");
  CHECK(train.code == 0);
  CHECK(Json::parse(train.out)["details"]["scheme"] == "dagger_star");
  CHECK(w.listing() == with_data);

  const Result invalid = w.run("--dry-run --set training.epsilon=2 gen-data");
  CHECK(invalid.code == 1);
  CHECK(error_line(invalid)["error"]["type"] == "invalid");
  CHECK(invalid.out.empty());
}

TEST_CASE("cli errors are single JSON lines with nonzero exits") {
  Workspace w("errors");
  const Result usage = w.run("frobnicate");
  CHECK(usage.code == 2);
  CHECK(error_line(usage)["error"]["type"] == "usage");

  const Result override = w.run("--set training.nope=1 gen-data");
  CHECK(override.code == 1);
  CHECK(error_line(override)["error"]["message"].get<std::string>().find("unknown key") != std::string::npos);

  const Result no_data = w.run("train-prim");
  CHECK(no_data.code == 1);
  const Json e = error_line(no_data)["error"];
  CHECK(e["command"] == "train-prim");
  CHECK(e["message"].get<std::string>().find("manifest.json") != std::string::npos);

  REQUIRE(w.run("gen-data --count 2").code == 0);
  const Result no_ckpt = w.run("train-mesh");
  CHECK(no_ckpt.code == 1);
  CHECK(error_line(no_ckpt)["error"]["message"].get<std::string>().find("missing Prim-Agent checkpoint") !=
        std::string::npos);
  CHECK(w.run("gen-data --count 2").code == 1);
  CHECK(w.run("gen-data --count 2 --force").code == 0);
  CHECK(w.run("gen-data --category boxy-boats").code == 1);
  CHECK(w.run("export-obj").code == 1);
}

TEST_CASE("cli generation is byte-identical per seed") {
  Workspace w("gen");
  REQUIRE(w.run("gen-data --count 6 --seed 9 --out a").code == 0);
  REQUIRE(w.run("gen-data --count 6 --seed 9 --out b").code == 0);
  REQUIRE(w.run("gen-data --count 6 --seed 10 --out c").code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(w.dir() / "a")) {
    CHECK(slurp(e.path()) == slurp(w.dir() / "b" / e.path().filename()));
    ++files;
  }
  CHECK(files == 13);
  CHECK(slurp(w.dir() / "a/manifest.json") != slurp(w.dir() / "c/manifest.json"));
}

TEST_CASE("cli ingest validates every file before writing") {
  Workspace w("ingest");
  REQUIRE(w.run("gen-data --count 3 --seed 2 --out gen").code == 0);
  const std::string files = "gen/boxy-tables-000.voxg gen/boxy-planes-001.voxg gen/boxy-cars-002.voxg";
  REQUIRE(w.run("ingest --category external --out ext " + files).code == 0);
  const auto ingested = load_dataset(w.dir() / "ext");
  const auto generated = load_dataset(w.dir() / "gen");
  REQUIRE(ingested.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ingested[i].name == generated[i].name);
    CHECK(*ingested[i].target == *generated[i].target);
    CHECK(*ingested[i].reference == *generated[i].reference);
  }

  save_voxg(synthetic_grid("boxy-cars", 24, 1, 0), w.dir() / "big.voxg");
  { std::ofstream(w.dir() / "junk.voxg") << "nope"; }
  const Result bad = w.run("ingest --out rejected gen/boxy-cars-002.voxg big.voxg junk.voxg");
  CHECK(bad.code == 1);
  const Json e = error_line(bad)["error"];
  REQUIRE(e["issues"].size() == 2);
  CHECK(e["issues"][0]["file"] == "big.voxg");
  CHECK(e["issues"][1]["file"] == "junk.voxg");
  CHECK_FALSE(fs::exists(w.dir() / "rejected"));
}

TEST_CASE("cli trains, models and evaluates end to end") {
  Workspace w("e2e");
  REQUIRE(w.run("gen-data --count 3 --seed 1").code == 0);
  REQUIRE(w.run("gen-data --count 2 --seed 2 --out data/eval").code == 0);
  const Result prim = w.run("train-prim --scheme dagger_star");
  REQUIRE(prim.code == 0);
  CHECK(prim.err.find("\"event\":\"iteration\"") != std::string::npos);
  CHECK(prim.out.rfind("mode,category,accumulated_reward,iou,chamfer\n", 0) == 0);
  REQUIRE(w.run("train-mesh --scheme dagger_star").code == 0);
  const fs::path run = w.dir() / "runs/tiny";
  for (const char* f : {"config.cfg", "checkpoints/prim.pqck", "checkpoints/mesh.pqck", "prim-train.csv", "mesh-train.csv"})
    CHECK(fs::exists(run / f));
  CHECK(slurp(run / "config.cfg").find("resolution = 16") != std::string::npos);

  const Result model = w.run("model --grid data/eval/boxy-planes-001.voxg");
  REQUIRE(model.code == 0);
  const Json summary = Json::parse(model.out);
  const fs::path out = run / "model/boxy-planes-001";
  std::ifstream loops_in(out / "loops.txt");
  const auto loops = read_loops(loops_in);
  REQUIRE(loops.size() == kLoopCount);
  const OccupancyGrid target = load_voxg(w.dir() / "data/eval/boxy-planes-001.voxg");
  CHECK(summary["iou"].get<double>() == doctest::Approx(iou(voxelize_mesh(loops, 16), target)));
  std::ifstream obj(out / "mesh.obj");
  CHECK(parse_obj(obj) == loft_mesh(loops));
  std::ifstream trace(out / "prim_trace.tsv");
  CHECK(std::count(std::istreambuf_iterator<char>(trace), {}, '\n') == 21);

  const Result blind = w.run("model --reference data/eval/boxy-planes-001.pfm --out blind");
  REQUIRE(blind.code == 0);
  CHECK(Json::parse(blind.out)["iou"].is_null());
  CHECK(slurp(w.dir() / "blind/loops.txt") == slurp(out / "loops.txt"));

  REQUIRE(w.run("eval").code == 0);
  const std::string first = slurp(run / "eval.csv");
  REQUIRE(w.run("eval").code == 0);
  CHECK(slurp(run / "eval.csv") == first);
  std::istringstream rows(first);
  std::string line;
  std::getline(rows, line);
  int count = 0;
  while (std::getline(rows, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 5);
    CHECK((cells[0] == "prim" || cells[0] == "mesh"));
    const double iou_value = std::stod(cells[3]);
    CHECK(iou_value >= 0.0);
    CHECK(iou_value <= 1.0);
    CHECK(std::stod(cells[4]) >= 0.0);
    ++count;
  }
  CHECK(count == 4);

  REQUIRE(w.run("export-obj --loops runs/tiny/model/boxy-planes-001/loops.txt --out again.obj").code == 0);
  CHECK(slurp(w.dir() / "again.obj") == slurp(out / "mesh.obj"));
}

TEST_CASE("cli run directories honour the run root") {
  Workspace w("root");
  REQUIRE(w.run("gen-data --count 1").code == 0);
  const fs::path root = w.dir() / "elsewhere";
  const Result r = w.run("--dry-run demo --agent prim", "PRIMESH_RUN_ROOT='" + root.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["writes"][0] == (root / "runs/tiny/demos/prim.pxpr").string());
  REQUIRE(w.run("demo --agent prim", "PRIMESH_RUN_ROOT='" + root.string() + "'").code == 0);
  CHECK(load_archive(root / "runs/tiny/demos/prim.pxpr").size() == 20);
}
