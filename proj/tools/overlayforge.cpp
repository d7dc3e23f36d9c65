// overlayforge: mine kernels from IR, generate their netlists, stitch an
// overlay, simulate it and tabulate the results. Each stage reads and writes
// files under --out so stages can be re-run independently.
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "overlayforge/overlayforge.hpp"

namespace fs = std::filesystem;
using namespace overlayforge;
using json = nlohmann::ordered_json;

namespace {

struct Config {
  std::vector<std::string> paths;
  std::uint32_t min_support = 2;
  std::string lib;
  std::string grid = "3x3";
  std::uint32_t queue_depth = stitch::kDefaultQueueDepth;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::string workload;
  std::string flavor = "both";
  bool joint = false;
  bool replicate = false;
  std::size_t vectors = 64;
};

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read ", p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path &p, const std::string &text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write ", p.string());
  out << text;
  log::emit(Severity::Debug, "wrote " + p.string());
}

std::pair<std::uint32_t, std::uint32_t> parse_grid(const std::string &s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    const auto r = std::stoul(s.substr(0, x)), c = std::stoul(s.substr(x + 1));
    if (r < 1 || c < 1) throw std::invalid_argument(s);
    return {static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
  } catch (const std::exception &) {
    fail(ErrorKind::Slot, "grid must look like RxC with R, C >= 1, got '", s, "'");
  }
}

hwlib::PrimitiveLibrary library(const Config &cfg) {
  if (cfg.lib.empty()) return hwlib::default_library();
  if (!fs::exists(cfg.lib)) fail(ErrorKind::Library, "library file ", cfg.lib, " does not exist");
  return hwlib::load_library(cfg.lib);
}

std::vector<fs::path> ir_inputs(const std::vector<std::string> &paths) {
  std::vector<fs::path> files;
  for (const auto &p : paths) {
    if (fs::is_directory(p)) {
      for (const auto &e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".ir") files.push_back(e.path());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      fail(ErrorKind::Io, "no such file ", p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::Io, "no input: no .ir files given");
  return files;
}

// Application directories under the output root: those holding kernels.json.
std::vector<fs::path> app_dirs(const fs::path &root) {
  std::vector<fs::path> dirs;
  if (fs::is_directory(root))
    for (const auto &e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "kernels.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::string code_string(const graph::DfsCode &c) {
  return graph::to_string(c, [](graph::Label l) { return format_label(graph::label_from_key(l)); });
}

// ---- mine ----

struct App {
  std::string name;
  ir::IrModule module;
  std::vector<graph::Dfg> cdfgs;
};

void mine_app(const Config &cfg, const App &app, json &timing) {
  const fs::path dir = fs::path(cfg.out) / app.name;
  miner::MiningConfig mc;
  mc.min_support = cfg.min_support;
  mc.validate();
  Diagnostics diags;
  const auto t0 = std::chrono::steady_clock::now();
  auto kernels = miner::mine_kernels(app.cdfgs, mc, &diags);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  timing[app.name] = secs;
  for (auto &k : kernels) k.latency = stitch::regularize_datapath(k.dfg, [&](std::size_t v) {
                                        const auto &op = k.dfg.vertices[v].op;
                                        return ops::default_latency(op.kind.op, op.width);
                                      }).total_latency;
  const auto rewritten = miner::inject_hwcalls(app.module, kernels, 0, &diags);
  const auto merged = miner::merge_kernels(kernels, app.module, 0, &diags);
  log::report(diags);

  if (fs::exists(dir))
    for (const auto &e : fs::directory_iterator(dir))
      if (e.path().extension() == ".dfg") fs::remove(e.path());
  json j;
  j["application"] = app.name;
  j["min_support"] = cfg.min_support;
  j["kernels"] = json::array();
  std::ostringstream report;
  for (const auto &k : kernels) {
    const std::string name = "k" + std::to_string(k.id);
    write_file(dir / (name + ".dfg"), graph::write_dfg(k.dfg));
    json kj;
    kj["name"] = name;
    kj["id"] = k.id;
    kj["support"] = k.support;
    kj["inputs"] = k.inputs;
    kj["outputs"] = k.outputs;
    kj["latency"] = k.latency;
    kj["weight"] = k.weight();
    kj["canonical"] = code_string(k.canonical);
    kj["dfg"] = stitch::dfg_to_json(k.dfg);
    j["kernels"].push_back(std::move(kj));
    report << app.name << ' ' << name << " support=" << k.support << " inputs=" << k.inputs.size()
           << " outputs=" << k.outputs.size() << " vertices=" << k.dfg.size() << " latency=" << k.latency << '\n';
  }
  j["merged"] = json::array();
  for (const auto &mk : merged) {
    if (!mk.merged()) continue;
    json mj;
    std::string name = "m" + std::to_string(mk.id);
    for (auto id : mk.kernel_ids) name += "_k" + std::to_string(id);
    mj["name"] = name;
    mj["kernels"] = mk.kernel_ids;
    mj["conditions"] = mk.condition_sources;
    mj["inputs"] = mk.inputs;
    mj["outputs"] = mk.outputs;
    mj["dfg"] = stitch::dfg_to_json(mk.dfg);
    j["merged"].push_back(std::move(mj));
    report << app.name << ' ' << name << " merged inputs=" << mk.inputs.size() << " outputs=" << mk.outputs.size()
           << " vertices=" << mk.dfg.size() << '\n';
  }
  write_file(dir / "kernels.json", j.dump(2) + "\n");
  write_file(dir / (app.name + ".hw.ir"), ir::print_ir(rewritten));
  write_file(dir / "report.txt", report.str());
  std::cout << report.str();
  log::emit(Severity::Info, app.name + ": " + std::to_string(kernels.size()) + " kernels");
}

int cmd_mine(const Config &cfg) {
  const auto files = ir_inputs(cfg.paths);
  std::vector<App> apps;
  for (const auto &f : files) {
    App a;
    a.name = f.stem().string();
    a.module = ir::parse_ir(read_file(f), a.name);
    a.cdfgs = ir::build_cdfgs(a.module);
    apps.push_back(std::move(a));
  }
  if (cfg.joint && apps.size() > 1) {
    // one pooled module: functions of every file, renamed on collision
    App pooled;
    pooled.name = "joint";
    std::set<std::string> seen;
    for (const auto &a : apps)
      for (auto f : a.module.functions) {
        if (!seen.insert(f.name).second) f.name = a.name + "." + f.name;
        seen.insert(f.name);
        pooled.module.functions.push_back(std::move(f));
      }
    pooled.cdfgs = ir::build_cdfgs(pooled.module);
    apps = {std::move(pooled)};
  }
  json timing = json::object();
  for (const auto &a : apps) mine_app(cfg, a, timing);
  // wall-clock values live apart from the deterministic stage outputs
  write_file(fs::path(cfg.out) / "timing.json", timing.dump(2) + "\n");
  return 0;
}

// ---- generate ----

struct KernelFile {
  std::string name;
  graph::Dfg dfg;
};

std::vector<KernelFile> load_kernels(const fs::path &dir) {
  std::vector<KernelFile> ks;
  const auto j = json::parse(read_file(dir / "kernels.json"));
  for (const auto &k : j.at("kernels")) ks.push_back({k.at("name").get<std::string>(), stitch::dfg_from_json(k.at("dfg"))});
  for (const auto &k : j.at("merged")) ks.push_back({k.at("name").get<std::string>(), stitch::dfg_from_json(k.at("dfg"))});
  return ks;
}

int cmd_generate(const Config &cfg) {
  const auto lib = library(cfg);
  std::vector<fs::path> dirs;
  if (cfg.paths.empty()) {
    dirs = app_dirs(cfg.out);
  } else {
    for (const auto &p : cfg.paths) {
      if (!fs::exists(fs::path(p) / "kernels.json")) fail(ErrorKind::Io, "missing stage output ", (fs::path(p) / "kernels.json").string());
      dirs.push_back(p);
    }
  }
  for (const auto &dir : dirs) {
    if (fs::exists(dir))
      for (const auto &e : fs::directory_iterator(dir))
        if (e.path().string().ends_with(".netlist.json")) fs::remove(e.path());
    for (const auto &k : load_kernels(dir)) {
      auto n = stitch::stitch_dfg(k.dfg, lib, k.name);
      write_file(dir / (k.name + ".netlist.json"), stitch::save_netlist(n));
      std::cout << dir.filename().string() << ' ' << k.name << " latency=" << n.latency << ' ' << n.resources
                << " delay_bits=" << n.delay_bits() << '\n';
    }
  }
  return 0;
}

// ---- stitch ----

void print_resources(const std::string &label, const stitch::FlavorResources &r) {
  std::cout << label << ' ' << r.total << '\n';
}

int cmd_stitch(const Config &cfg) {
  const auto lib = library(cfg);
  const auto [rows, cols] = parse_grid(cfg.grid);
  auto overlay = stitch::make_overlay(rows, cols, cfg.queue_depth);
  std::vector<stitch::Netlist> cores;
  for (const auto &p : cfg.paths) cores.push_back(stitch::parse_netlist(read_file(p)));
  if (cores.size() > overlay.size())
    fail(ErrorKind::Slot, cores.size(), " netlists do not fit a ", rows, "x", cols, " overlay");
  std::map<std::string, stitch::Netlist> assign;
  const std::size_t filled = cfg.replicate && !cores.empty() ? overlay.size() : cores.size();
  for (std::size_t i = 0; i < filled; ++i) assign[overlay.slot_name(i)] = cores[i % cores.size()];
  overlay = stitch::fill_blackboxes(overlay, assign);
  write_file(fs::path(cfg.out) / "overlay.json", stitch::save_overlay(overlay));
  const auto rep = stitch::estimate_resources(overlay, lib);
  std::cout << "overlay " << rows << "x" << cols << " assigned=" << overlay.kernel.size() << '\n';
  if (cfg.flavor != "alu") print_resources("as", rep.as);
  if (cfg.flavor != "as") print_resources("alu", rep.alu);
  print_resources("bare", rep.bare);
  return 0;
}

// ---- sim ----

sim::Workload random_workload(const stitch::Netlist &n, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  sim::Workload w;
  for (const auto &p : n.inputs) {
    w.names.push_back(p.name);
    std::vector<std::uint64_t> s(length);
    if (p.tag.starts_with('#')) {
      std::fill(s.begin(), s.end(), static_cast<std::uint64_t>(std::stoll(p.tag.substr(1))));
    } else {
      for (auto &v : s) v = ops::mask(rng(), p.width);
    }
    w.streams.push_back(std::move(s));
  }
  return w;
}

int cmd_sim(const Config &cfg) {
  if (cfg.paths.size() != 1) fail(ErrorKind::Io, "sim takes exactly one overlay file");
  const auto lib = library(cfg);
  const auto overlay = stitch::parse_overlay(read_file(cfg.paths[0]));
  std::optional<sim::Workload> given;
  if (!cfg.workload.empty()) given = sim::read_workload_csv(read_file(cfg.workload));
  std::map<std::string, sim::Workload> schedule;
  std::uint64_t salt = 0;
  for (const auto &[slot, kernel] : overlay.kernel) {
    const auto &core = *overlay.slots[*overlay.slot_index(slot)].core;
    schedule[slot] = given ? *given : random_workload(core, cfg.vectors, cfg.seed + salt);
    ++salt;
  }
  const auto rep = sim::simulate_overlay(overlay, schedule, lib);
  json j;
  j["pes"] = json::array();
  for (const auto &pe : rep.pes) {
    std::cout << "pe " << pe.slot << ' ' << pe.kernel;
    if (cfg.flavor != "alu") std::cout << " as_cycles=" << pe.as.total_cycles;
    if (cfg.flavor != "as") std::cout << " alu_cycles=" << pe.alu.total_cycles;
    std::cout << " oracle=" << (pe.oracle_ok ? "pass" : "FAIL") << '\n';
    json pj;
    pj["slot"] = pe.slot;
    pj["kernel"] = pe.kernel;
    pj["vectors"] = pe.as.results.size();
    pj["as_cycles"] = pe.as.total_cycles;
    pj["as_first_output"] = pe.as.first_output ? json(*pe.as.first_output) : json(nullptr);
    pj["alu_cycles"] = pe.alu.total_cycles;
    pj["oracle"] = pe.oracle_ok;
    if (!pe.oracle_ok) pj["divergence"] = pe.divergence;
    j["pes"].push_back(std::move(pj));
  }
  j["as_cycles"] = rep.as_cycles;
  j["alu_cycles"] = rep.alu_cycles;
  j["oracle"] = rep.oracle_ok;
  write_file(fs::path(cfg.out) / "sim_report.json", j.dump(2) + "\n");
  if (cfg.flavor != "alu") std::cout << "aggregate as_cycles=" << rep.as_cycles << '\n';
  if (cfg.flavor != "as") std::cout << "aggregate alu_cycles=" << rep.alu_cycles << '\n';
  if (!rep.oracle_ok) {
    for (const auto &pe : rep.pes)
      if (!pe.oracle_ok) {
        std::cerr << "oracle mismatch: " << pe.divergence << '\n';
        break;
      }
    return 1;
  }
  std::cout << "oracle pass\n";
  return 0;
}

// ---- report ----

int cmd_report(const Config &cfg) {
  const auto lib = library(cfg);
  const fs::path root = cfg.out;
  const auto dirs = app_dirs(root);
  std::vector<std::string> missing;
  if (dirs.empty()) missing.push_back((root / "<application>/kernels.json").string());
  if (!fs::exists(root / "timing.json")) missing.push_back((root / "timing.json").string());
  for (const auto &d : dirs)
    if (!fs::exists(d / "k0.netlist.json")) missing.push_back((d / "k0.netlist.json").string());
  if (!missing.empty()) {
    std::string list;
    for (const auto &m : missing) list += "\n  " + m;
    fail(ErrorKind::Io, "missing stage outputs:", list);
  }
  const auto timing = json::parse(read_file(root / "timing.json"));

  std::ostringstream t1, t2, f7;
  t1 << "application,kernel,inputs,outputs,support,vertices,latency\n";
  std::cout << std::left << std::setw(14) << "application" << std::setw(8) << "kernel" << std::setw(8) << "inputs"
            << std::setw(9) << "outputs" << std::setw(9) << "support" << "mining_s\n";
  for (const auto &d : dirs) {
    const auto j = json::parse(read_file(d / "kernels.json"));
    const auto app = j.at("application").get<std::string>();
    if (j.at("kernels").empty()) continue;
    const auto &k = j.at("kernels").at(0);
    t1 << app << ',' << k.at("name").get<std::string>() << ',' << k.at("inputs").size() << ','
       << k.at("outputs").size() << ',' << k.at("support").get<std::uint32_t>() << ','
       << k.at("dfg").at("vertices").size() << ',' << k.at("latency").get<std::uint32_t>() << '\n';
    std::cout << std::setw(14) << app << std::setw(8) << k.at("name").get<std::string>() << std::setw(8)
              << k.at("inputs").size() << std::setw(9) << k.at("outputs").size() << std::setw(9) << k.at("support").get<std::uint32_t>()
              << std::fixed << std::setprecision(4) << timing.value(app, 0.0) << '\n';
  }

  // cycle counts of each application's first kernel on one PE
  const bool as = cfg.flavor != "alu", alu = cfg.flavor != "as";
  t2 << "application,kernel,vectors" << (as ? ",as_cycles" : "") << (alu ? ",alu_cycles" : "") << '\n';
  const auto alu_model = stitch::generic_alu(lib, cfg.queue_depth);
  for (const auto &d : dirs) {
    const auto core = stitch::parse_netlist(read_file(d / "k0.netlist.json"));
    const auto pe = stitch::wrap_pe(core, cfg.queue_depth);
    for (std::size_t n : {16, 64, 256, 1024}) {
      const auto w = random_workload(core, n, cfg.seed);
      t2 << d.filename().string() << ',' << core.name << ',' << n;
      if (as) t2 << ',' << sim::simulate_pe(pe, w).total_cycles;
      if (alu) t2 << ',' << sim::simulate_alu(core.source, alu_model, w).total_cycles;
      t2 << '\n';
    }
  }

  // resources of a square overlay filled with the first application's kernel
  const auto core = stitch::parse_netlist(read_file(dirs.front() / "k0.netlist.json"));
  f7 << "grid,pes";
  if (as) f7 << ",as_lut,as_ff,as_dsp";
  if (alu) f7 << ",alu_lut,alu_ff,alu_dsp";
  f7 << ",bare_lut,bare_ff,bare_dsp\n";
  for (std::uint32_t g = 2; g <= 10; ++g) {
    auto o = stitch::make_overlay(g, g, cfg.queue_depth);
    std::map<std::string, stitch::Netlist> assign;
    for (std::size_t i = 0; i < o.size(); ++i) assign[o.slot_name(i)] = core;
    o = stitch::fill_blackboxes(o, assign);
    const auto r = stitch::estimate_resources(o, lib);
    f7 << g << 'x' << g << ',' << o.size();
    if (as) f7 << ',' << r.as.total.lut << ',' << r.as.total.ff << ',' << r.as.total.dsp;
    if (alu) f7 << ',' << r.alu.total.lut << ',' << r.alu.total.ff << ',' << r.alu.total.dsp;
    f7 << ',' << r.bare.total.lut << ',' << r.bare.total.ff << ',' << r.bare.total.dsp << '\n';
  }
  write_file(root / "kernel_io.csv", t1.str());
  write_file(root / "cycles.csv", t2.str());
  write_file(root / "scaling.csv", f7.str());
  std::cout << "\n" << t2.str() << "\n" << f7.str();
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"overlayforge: application-specific overlay generation"};
  app.require_subcommand(1);
  Config cfg;
  auto common = [&](CLI::App *s) {
    s->add_option("--out", cfg.out, "output directory")->capture_default_str();
    s->add_option("--lib", cfg.lib, "primitive library JSON (default: built-in)");
    s->add_option("--seed", cfg.seed, "seed for generated workloads")->capture_default_str();
  };
  auto flavor = [&](CLI::App *s) {
    s->add_option("--flavor", cfg.flavor, "as, alu or both")->check(CLI::IsMember({"as", "alu", "both"}))->capture_default_str();
    s->add_option("--queue-depth", cfg.queue_depth, "PE queue depth")->check(CLI::PositiveNumber)->capture_default_str();
  };

  auto *mine = app.add_subcommand("mine", "mine kernels from IR files or directories");
  common(mine);
  mine->add_option("inputs", cfg.paths, "IR files or directories")->required();
  mine->add_option("--min-support", cfg.min_support, "minimum support")->check(CLI::PositiveNumber)->capture_default_str();
  mine->add_flag("--joint", cfg.joint, "mine all files as one transaction set");

  auto *generate = app.add_subcommand("generate", "stitch kernel netlists from mined kernels");
  common(generate);
  generate->add_option("dirs", cfg.paths, "application directories (default: every one under --out)");

  auto *stitch_cmd = app.add_subcommand("stitch", "fill an overlay layout with kernel netlists");
  common(stitch_cmd);
  flavor(stitch_cmd);
  stitch_cmd->add_option("netlists", cfg.paths, "netlist files, assigned to slots row-major");
  stitch_cmd->add_option("--grid", cfg.grid, "overlay grid RxC")->capture_default_str();
  stitch_cmd->add_flag("--replicate", cfg.replicate, "repeat the netlists until every slot is filled");

  auto *sim_cmd = app.add_subcommand("sim", "simulate an overlay against the reference interpreter");
  common(sim_cmd);
  flavor(sim_cmd);
  sim_cmd->add_option("overlay", cfg.paths, "overlay file")->required();
  sim_cmd->add_option("--workload", cfg.workload, "workload CSV (default: random, seeded)");
  sim_cmd->add_option("--vectors", cfg.vectors, "random workload length")->capture_default_str();

  auto *report = app.add_subcommand("report", "tabulate kernel I/O, cycle counts and resource scaling");
  common(report);
  flavor(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }
  try {
    if (*mine) return cmd_mine(cfg);
    if (*generate) return cmd_generate(cfg);
    if (*stitch_cmd) return cmd_stitch(cfg);
    if (*sim_cmd) return cmd_sim(cfg);
    if (*report) return cmd_report(cfg);
  } catch (const std::exception &e) {
    log::emit(Severity::Error, e.what());
    return 1;
  }
  return 0;
}
