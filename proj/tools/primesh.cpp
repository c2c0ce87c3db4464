#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "primesh/data/dataset.hpp"
#include "primesh/expert/virtual_expert.hpp"
#include "primesh/geometry/voxg.hpp"
#include "primesh/pipeline/pipeline.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace primesh;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool dry_run = false;
};

RunConfig resolve_config(const Common& common) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : load_config(common.config_path);
  for (const auto& o : common.overrides) apply_override(config, o);
  validate(config);
  return config;
}

Json config_json(const RunConfig& config) {
  std::stringstream text;
  write_config(config, text);
  Json out = Json::object();
  std::string line, section;
  while (std::getline(text, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    out[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

/// What a command will read and write; printed instead of running on --dry-run.
struct Plan {
  std::string command;
  Json reads = Json::array();
  Json writes = Json::array();
  Json details = Json::object();

  void print(const RunConfig& config) const {
    Json out{{"command", command}, {"dry_run", true}, {"reads", reads}, {"writes", writes},
             {"details", details}, {"config", config_json(config)}};
    std::cout << out.dump(2) << '\n';
  }
};

void event(const Json& j) { std::cerr << j.dump() << std::endl; }

template <class Write>
void write_file(const fs::path& path, Write write) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write(out);
  out.flush();
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<Shape> require_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw FormatError("no dataset at " + dir.string() + " (manifest.json missing)");
  return load_dataset(dir);
}

QNetwork<float> require_checkpoint(const fs::path& path, const InputLayout& layout, const std::string& agent) {
  if (!fs::exists(path)) throw FormatError("missing " + agent + " checkpoint " + path.string());
  QNetwork<float> net = load_checkpoint(path);
  require_layout(net, layout, agent);
  return net;
}

fs::path checkpoint_dir(const RunConfig& config) { return resolve_run_dir(config) / "checkpoints"; }

void snapshot_config(const RunConfig& config) {
  write_file(resolve_run_dir(config) / "config.cfg", [&](std::ostream& out) { write_config(config, out); });
}

void print_metrics(std::span<const MetricsRow> rows) { write_metrics_csv(rows, std::cout); }

// Expert primitives, merged and capped, as the Mesh-Agent's demonstration tasks.
std::vector<MeshTask> expert_mesh_tasks(std::span<const Shape> shapes, const PrimConfig& prim) {
  std::vector<MeshTask> tasks;
  PrimEnv env(prim);
  for (const auto& shape : shapes) {
    expert_rollout(env, shape);
    tasks.push_back(make_mesh_task(shape, merge_primitives(env.state().cuboids)));
  }
  return tasks;
}

template <class Env>
std::function<void(const IterationReport&)> progress(const std::string& agent, std::size_t tasks) {
  return [agent, tasks](const IterationReport& r) {
    event({{"event", "iteration"}, {"agent", agent}, {"task", r.task + 1}, {"tasks", tasks},
           {"iteration", r.iteration + 1}, {"updates", r.updates}, {"demo_long", r.demo_long->size()}});
  };
}

// --- gen-data ---------------------------------------------------------------

struct GenData {
  std::string category = "mixed";
  int count = 20;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

int gen_data(const Common& common, const GenData& o) {
  const RunConfig config = resolve_config(common);
  const fs::path out = o.out.empty() ? fs::path(config.dataset) : fs::path(o.out);
  require(o.count >= 1, "gen-data: --count must be at least 1");
  if (o.category != "mixed") synthetic_grid(o.category, config.resolution, o.seed, 0);
  if (!o.force && fs::exists(out / "manifest.json"))
    throw ContractViolation("gen-data: " + out.string() + " already holds a dataset (use --force to overwrite)");
  Plan plan{"gen-data"};
  plan.writes.push_back(out.string());
  plan.details = {{"category", o.category}, {"count", o.count}, {"seed", o.seed}, {"resolution", config.resolution}};
  if (common.dry_run) return plan.print(config), 0;

  const auto shapes = o.category == "mixed" ? synthetic_benchmark(o.count, config.resolution, o.seed)
                                            : synthetic_shapes(o.category, o.count, config.resolution, o.seed);
  write_dataset(out, shapes);
  event({{"event", "done"}, {"command", "gen-data"}, {"shapes", shapes.size()}, {"dataset", out.string()}});
  return 0;
}

// --- ingest -----------------------------------------------------------------

struct Ingest {
  std::vector<std::string> files;
  std::string category = "external";
  std::string out;
};

int ingest(const Common& common, const Ingest& o) {
  const RunConfig config = resolve_config(common);
  const fs::path out = o.out.empty() ? fs::path(config.dataset) : fs::path(o.out);
  std::vector<fs::path> files(o.files.begin(), o.files.end());
  const IngestReport report = validate_grids(files, o.category);
  if (!report.ok()) {
    Json issues = Json::array();
    for (const auto& i : report.issues) issues.push_back({{"file", i.file.string()}, {"message", i.message}});
    std::cerr << Json{{"error", {{"command", "ingest"}, {"type", "format"},
                                 {"message", std::to_string(report.issues.size()) + " file(s) rejected"},
                                 {"issues", issues}}}}
                     .dump()
              << std::endl;
    return 1;
  }
  Plan plan{"ingest"};
  for (const auto& f : files) plan.reads.push_back(f.string());
  plan.writes.push_back(out.string());
  plan.details = {{"category", o.category}, {"shapes", report.shapes.size()},
                  {"resolution", report.shapes.front().resolution()}};
  if (common.dry_run) return plan.print(config), 0;
  write_dataset(out, report.shapes);
  event({{"event", "done"}, {"command", "ingest"}, {"shapes", report.shapes.size()}, {"dataset", out.string()}});
  return 0;
}

// --- demo -------------------------------------------------------------------

struct Demo {
  std::string agent = "prim";
  std::string dataset;
  std::string out;
};

int demo(const Common& common, const Demo& o) {
  const RunConfig config = resolve_config(common);
  if (o.agent != "prim" && o.agent != "mesh") throw ContractViolation("demo: --agent must be prim or mesh");
  const fs::path data = o.dataset.empty() ? fs::path(config.dataset) : fs::path(o.dataset);
  const fs::path out = o.out.empty() ? resolve_run_dir(config) / "demos" / (o.agent + ".pxpr") : fs::path(o.out);
  const auto shapes = require_dataset(data);
  Plan plan{"demo"};
  plan.reads.push_back(data.string());
  plan.writes.push_back(out.string());
  plan.details = {{"agent", o.agent}, {"shapes", shapes.size()}};
  if (common.dry_run) return plan.print(config), 0;

  std::vector<Experience> records;
  if (o.agent == "prim") {
    PrimEnv env(config.prim);
    records = generate_demonstrations(env, std::span<const Shape>(shapes));
  } else {
    const auto tasks = expert_mesh_tasks(shapes, config.prim);
    MeshEnv env(config.mesh);
    records = generate_demonstrations(env, std::span<const MeshTask>(tasks));
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_archive(records, out);
  event({{"event", "done"}, {"command", "demo"}, {"records", records.size()}, {"archive", out.string()}});
  return 0;
}

// --- train-prim / train-mesh --------------------------------------------------

struct Train {
  std::string scheme = "full";
  std::string dataset;
};

int train_prim(const Common& common, const Train& o) {
  const RunConfig config = resolve_config(common);
  const Scheme scheme = parse_scheme(o.scheme);
  const fs::path data = o.dataset.empty() ? fs::path(config.dataset) : fs::path(o.dataset);
  const auto shapes = require_dataset(data);
  const fs::path run = resolve_run_dir(config);
  Plan plan{"train-prim"};
  plan.reads.push_back(data.string());
  for (const char* f : {"config.cfg", "checkpoints/prim.pqck", "prim-train.csv"}) plan.writes.push_back((run / f).string());
  plan.details = {{"scheme", scheme_name(scheme)}, {"shapes", shapes.size()}};
  if (common.dry_run) return plan.print(config), 0;

  snapshot_config(config);
  Trainer<PrimEnv> trainer(PrimEnv(config.prim), config.network, config.training);
  trainer.on_iteration = progress<PrimEnv>("prim", shapes.size());
  train_scheme(trainer, scheme, std::span<const Shape>(shapes));
  fs::create_directories(checkpoint_dir(config));
  save_checkpoint(trainer.networks().current, checkpoint_dir(config) / "prim.pqck");

  std::vector<EpisodeResult> results;
  for (const auto& s : shapes) results.push_back(trainer.evaluate(s));
  const auto rows = summarize(scheme_name(scheme), shapes, results);
  write_file(run / "prim-train.csv", [&](std::ostream& out) { write_metrics_csv(rows, out); });
  print_metrics(rows);
  return 0;
}

int train_mesh(const Common& common, const Train& o) {
  const RunConfig config = resolve_config(common);
  const Scheme scheme = parse_scheme(o.scheme);
  const fs::path data = o.dataset.empty() ? fs::path(config.dataset) : fs::path(o.dataset);
  const auto shapes = require_dataset(data);
  const fs::path run = resolve_run_dir(config);
  const fs::path prim_path = checkpoint_dir(config) / "prim.pqck";
  const auto prim = require_checkpoint(prim_path, prim_layout(config.prim.episode_steps), "Prim-Agent");
  Plan plan{"train-mesh"};
  plan.reads = {data.string(), prim_path.string()};
  for (const char* f : {"config.cfg", "checkpoints/mesh.pqck", "mesh-train.csv"}) plan.writes.push_back((run / f).string());
  plan.details = {{"scheme", scheme_name(scheme)}, {"shapes", shapes.size()}};
  if (common.dry_run) return plan.print(config), 0;

  snapshot_config(config);
  const auto tasks = mesh_tasks_from_prim(prim, shapes, config.prim);
  Trainer<MeshEnv> trainer(MeshEnv(config.mesh), config.network, config.training);
  trainer.on_iteration = progress<MeshEnv>("mesh", tasks.size());
  train_scheme(trainer, scheme, std::span<const MeshTask>(tasks));
  save_checkpoint(trainer.networks().current, checkpoint_dir(config) / "mesh.pqck");

  std::vector<EpisodeResult> results;
  for (const auto& t : tasks) results.push_back(trainer.evaluate(t));
  const auto rows = summarize(scheme_name(scheme), shapes, results);
  write_file(run / "mesh-train.csv", [&](std::ostream& out) { write_metrics_csv(rows, out); });
  print_metrics(rows);
  return 0;
}

// --- run-scheme ---------------------------------------------------------------

struct RunSchemes {
  std::string scheme = "all";
  std::string dataset;
  std::string eval_dataset;
};

int run_schemes(const Common& common, const RunSchemes& o) {
  const RunConfig config = resolve_config(common);
  std::vector<Scheme> schemes;
  if (o.scheme == "all")
    schemes.assign(kAllSchemes.begin(), kAllSchemes.end());
  else
    schemes.push_back(parse_scheme(o.scheme));
  const fs::path data = o.dataset.empty() ? fs::path(config.dataset) : fs::path(o.dataset);
  const fs::path eval_data = o.eval_dataset.empty() ? fs::path(config.eval_dataset) : fs::path(o.eval_dataset);
  const auto train = require_dataset(data);
  const auto eval = require_dataset(eval_data);
  const fs::path run = resolve_run_dir(config);
  Plan plan{"run-scheme"};
  plan.reads = {data.string(), eval_data.string()};
  plan.writes = {(run / "config.cfg").string(), (run / "metrics.csv").string()};
  Json names = Json::array();
  for (Scheme s : schemes) {
    names.push_back(scheme_name(s));
    plan.writes.push_back((run / "checkpoints" / ("prim-" + scheme_name(s) + ".pqck")).string());
  }
  plan.details = {{"schemes", names}, {"train_shapes", train.size()}, {"eval_shapes", eval.size()}};
  if (common.dry_run) return plan.print(config), 0;

  snapshot_config(config);
  fs::create_directories(checkpoint_dir(config));
  std::vector<MetricsRow> rows;
  for (Scheme s : schemes) {
    event({{"event", "scheme"}, {"scheme", scheme_name(s)}});
    const SchemeResult r = run_scheme(s, train, eval, config.network, config.training, config.prim);
    save_checkpoint(r.network, checkpoint_dir(config) / ("prim-" + scheme_name(s) + ".pqck"));
    rows.insert(rows.end(), r.metrics.begin(), r.metrics.end());
    write_file(run / "metrics.csv", [&](std::ostream& out) { write_metrics_csv(rows, out); });
  }
  print_metrics(rows);
  return 0;
}

// --- model --------------------------------------------------------------------

struct Model {
  std::string grid;
  std::string reference;
  std::string prim;
  std::string mesh;
  std::string out;
};

int model(const Common& common, const Model& o) {
  const RunConfig config = resolve_config(common);
  if (o.grid.empty() && o.reference.empty()) throw ContractViolation("model: give --grid, --reference or both");
  const fs::path prim_path = o.prim.empty() ? checkpoint_dir(config) / "prim.pqck" : fs::path(o.prim);
  const fs::path mesh_path = o.mesh.empty() ? checkpoint_dir(config) / "mesh.pqck" : fs::path(o.mesh);
  const auto prim = require_checkpoint(prim_path, prim_layout(config.prim.episode_steps), "Prim-Agent");
  const auto mesh = require_checkpoint(mesh_path, mesh_layout(config.mesh.episode_steps), "Mesh-Agent");

  const bool has_target = !o.grid.empty();
  const fs::path source = has_target ? fs::path(o.grid) : fs::path(o.reference);
  Shape shape;
  if (has_target) {
    shape = make_shape(source.stem().string(), "external", load_voxg(source));
  } else {
    shape.name = source.stem().string();
    shape.category = "external";
    shape.target = std::make_shared<OccupancyGrid>(config.resolution);
  }
  if (!o.reference.empty()) {
    std::ifstream in(o.reference, std::ios::binary);
    if (!in) throw FormatError("cannot open reference " + o.reference);
    shape.reference = std::make_shared<DepthMap>(read_pfm(in));
  }
  const fs::path out = o.out.empty() ? resolve_run_dir(config) / "model" / shape.name : fs::path(o.out);

  Plan plan{"model"};
  plan.reads = {prim_path.string(), mesh_path.string()};
  if (has_target) plan.reads.push_back(o.grid);
  if (!o.reference.empty()) plan.reads.push_back(o.reference);
  for (const char* f : {"primitives.txt", "merged.txt", "initial_loops.txt", "loops.txt", "mesh.obj", "prim_trace.tsv",
                        "mesh_trace.tsv", "summary.json"})
    plan.writes.push_back((out / f).string());
  plan.details = {{"shape", shape.name}, {"has_target", has_target}};
  if (common.dry_run) return plan.print(config), 0;

  const ModelResult m = model_shape(prim, mesh, shape, has_target, config);
  write_file(out / "primitives.txt", [&](std::ostream& s) { write_primitives(m.primitives, s); });
  write_file(out / "merged.txt", [&](std::ostream& s) { write_primitives(m.merged, s); });
  write_file(out / "initial_loops.txt", [&](std::ostream& s) { write_loops(m.initial_loops, s); });
  write_file(out / "loops.txt", [&](std::ostream& s) { write_loops(m.loops, s); });
  write_file(out / "mesh.obj", [&](std::ostream& s) { export_obj(m.mesh, s); });
  write_file(out / "prim_trace.tsv", [&](std::ostream& s) { write_prim_trace(m.prim_trace, s); });
  write_file(out / "mesh_trace.tsv", [&](std::ostream& s) { write_mesh_trace(m.mesh_trace, s); });
  Json summary{{"shape", shape.name},
               {"primitives_kept", m.merged.size()},
               {"primitives_dropped", m.dropped_primitives},
               {"vertices", m.mesh.vertices.size()},
               {"triangles", m.mesh.triangles.size()},
               {"iou", nullptr},
               {"chamfer", nullptr}};
  if (has_target) {
    summary["prim_reward"] = m.prim_reward;
    summary["mesh_reward"] = m.mesh_reward;
    summary["iou"] = *m.iou;
    if (!std::isnan(*m.chamfer)) summary["chamfer"] = *m.chamfer;
  }
  write_file(out / "summary.json", [&](std::ostream& s) { s << summary.dump(2) << '\n'; });
  std::cout << summary.dump() << '\n';
  return 0;
}

// --- eval ---------------------------------------------------------------------

struct Eval {
  std::string dataset;
  std::string prim;
  std::string mesh;
};

int eval(const Common& common, const Eval& o) {
  const RunConfig config = resolve_config(common);
  const fs::path data = o.dataset.empty() ? fs::path(config.eval_dataset) : fs::path(o.dataset);
  const fs::path prim_path = o.prim.empty() ? checkpoint_dir(config) / "prim.pqck" : fs::path(o.prim);
  const fs::path mesh_path = o.mesh.empty() ? checkpoint_dir(config) / "mesh.pqck" : fs::path(o.mesh);
  const auto shapes = require_dataset(data);
  const auto prim = require_checkpoint(prim_path, prim_layout(config.prim.episode_steps), "Prim-Agent");
  const auto mesh = require_checkpoint(mesh_path, mesh_layout(config.mesh.episode_steps), "Mesh-Agent");
  const fs::path out = resolve_run_dir(config) / "eval.csv";
  Plan plan{"eval"};
  plan.reads = {data.string(), prim_path.string(), mesh_path.string()};
  plan.writes.push_back(out.string());
  plan.details = {{"shapes", shapes.size()}};
  if (common.dry_run) return plan.print(config), 0;

  const auto rows = evaluate_agents(prim, mesh, shapes, config);
  write_file(out, [&](std::ostream& s) { write_metrics_csv(rows, s); });
  print_metrics(rows);
  return 0;
}

// --- export-obj ---------------------------------------------------------------

struct ExportObj {
  std::string loops;
  std::string primitives;
  std::string out = "-";
};

int export_obj_cmd(const Common& common, const ExportObj& o) {
  const RunConfig config = resolve_config(common);
  const std::string source = o.loops.empty() ? o.primitives : o.loops;
  std::ifstream in(source);
  if (!in) throw FormatError("cannot open " + source);
  std::vector<EdgeLoop> loops;
  if (!o.loops.empty()) {
    loops = read_loops(in);
  } else {
    const auto merged = merge_primitives(read_primitives(in));
    require(!merged.empty(), "export-obj: every primitive is deleted");
    loops = assign_edge_loops(largest_primitives(merged, kLoopCount / 2), kLoopCount);
  }
  const TriangleMesh mesh = loft_mesh(loops);
  Plan plan{"export-obj"};
  plan.reads.push_back(source);
  plan.writes.push_back(o.out == "-" ? "stdout" : o.out);
  plan.details = {{"loops", loops.size()}, {"triangles", mesh.triangles.size()}};
  if (common.dry_run) return plan.print(config), 0;
  if (o.out == "-")
    export_obj(mesh, std::cout);
  else
    write_file(o.out, [&](std::ostream& s) { export_obj(mesh, s); });
  return 0;
}

int report(const std::string& command, const std::string& type, const std::string& message, int code) {
  std::cerr << Json{{"error", {{"command", command}, {"type", type}, {"message", message}}}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates and frees many mid-sized matrices per update; keeping
  // them on the heap instead of fresh mappings removes most page-fault cost.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"Primitive-based shape modelling with imitation and reinforcement learning"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Override one key: section.key=value (repeatable)");
  app.add_flag("--dry-run", common.dry_run, "Validate and print the plan without side effects");

  int status = 0;
  std::string command;
  auto on = [&](CLI::App* sub, auto fn) {
    sub->callback([&, sub, fn] {
      command = sub->get_name();
      status = fn();
    });
  };

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--category", gen.category, "boxy-tables, boxy-planes, boxy-cars or mixed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of shapes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Dataset directory (default paths.dataset)");
  gen_cmd->add_flag("--force", gen.force, "Overwrite an existing dataset");
  on(gen_cmd, [&] { return gen_data(common, gen); });

  Ingest ing;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate external VOXG grids into a dataset");
  ingest_cmd->add_option("files", ing.files, "VOXG files")->required();
  ingest_cmd->add_option("--category", ing.category, "Category label")->capture_default_str();
  ingest_cmd->add_option("--out", ing.out, "Dataset directory (default paths.dataset)");
  on(ingest_cmd, [&] { return ingest(common, ing); });

  Demo dem;
  auto* demo_cmd = app.add_subcommand("demo", "Record virtual-expert demonstrations");
  demo_cmd->add_option("--agent", dem.agent, "prim or mesh")->capture_default_str();
  demo_cmd->add_option("--dataset", dem.dataset, "Dataset directory (default paths.dataset)");
  demo_cmd->add_option("--out", dem.out, "Archive path (default <run>/demos/<agent>.pxpr)");
  on(demo_cmd, [&] { return demo(common, dem); });

  Train tp;
  auto* tp_cmd = app.add_subcommand("train-prim", "Train the Prim-Agent");
  tp_cmd->add_option("--scheme", tp.scheme, "Training scheme")->capture_default_str();
  tp_cmd->add_option("--dataset", tp.dataset, "Training dataset (default paths.dataset)");
  on(tp_cmd, [&] { return train_prim(common, tp); });

  Train tm;
  auto* tm_cmd = app.add_subcommand("train-mesh", "Train the Mesh-Agent on the trained Prim-Agent's output");
  tm_cmd->add_option("--scheme", tm.scheme, "Training scheme")->capture_default_str();
  tm_cmd->add_option("--dataset", tm.dataset, "Training dataset (default paths.dataset)");
  on(tm_cmd, [&] { return train_mesh(common, tm); });

  RunSchemes rs;
  auto* rs_cmd = app.add_subcommand("run-scheme", "Train and compare Prim-Agent training schemes");
  rs_cmd->add_option("--scheme", rs.scheme, "Scheme name or all")->capture_default_str();
  rs_cmd->add_option("--dataset", rs.dataset, "Training dataset (default paths.dataset)");
  rs_cmd->add_option("--eval-dataset", rs.eval_dataset, "Evaluation dataset (default paths.eval_dataset)");
  on(rs_cmd, [&] { return run_schemes(common, rs); });

  Model mod;
  auto* model_cmd = app.add_subcommand("model", "Model one shape with both trained agents");
  model_cmd->add_option("--grid", mod.grid, "Target VOXG grid (enables IoU and Chamfer)");
  model_cmd->add_option("--reference", mod.reference, "Reference PFM (default: rendered from --grid)");
  model_cmd->add_option("--prim", mod.prim, "Prim-Agent checkpoint (default <run>/checkpoints/prim.pqck)");
  model_cmd->add_option("--mesh", mod.mesh, "Mesh-Agent checkpoint (default <run>/checkpoints/mesh.pqck)");
  model_cmd->add_option("--out", mod.out, "Output directory (default <run>/model/<name>)");
  on(model_cmd, [&] { return model(common, mod); });

  Eval ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate both agents on a dataset");
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset (default paths.eval_dataset)");
  eval_cmd->add_option("--prim", ev.prim, "Prim-Agent checkpoint");
  eval_cmd->add_option("--mesh", ev.mesh, "Mesh-Agent checkpoint");
  on(eval_cmd, [&] { return eval(common, ev); });

  ExportObj ex;
  auto* ex_cmd = app.add_subcommand("export-obj", "Loft a loop or primitive listing into an OBJ file");
  auto* loops_opt = ex_cmd->add_option("--loops", ex.loops, "Loop listing");
  auto* prims_opt = ex_cmd->add_option("--primitives", ex.primitives, "Primitive listing");
  loops_opt->excludes(prims_opt);
  ex_cmd->add_option("--out", ex.out, "OBJ path or - for stdout")->capture_default_str();
  on(ex_cmd, [&] {
    if (ex.loops.empty() && ex.primitives.empty()) throw ContractViolation("export-obj: give --loops or --primitives");
    return export_obj_cmd(common, ex);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(command, "usage", e.what(), 2);
  } catch (const FormatError& e) {
    return report(command, "format", e.what(), 1);
  } catch (const fs::filesystem_error& e) {
    return report(command, "io", e.what(), 1);
  } catch (const ContractViolation& e) {
    return report(command, "invalid", e.what(), 1);
  } catch (const std::exception& e) {
    return report(command, "internal", e.what(), 1);
  }
  return status;
}
