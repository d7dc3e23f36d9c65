// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

#include "support.hpp"

using namespace testkit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

Outcome fail_with(const std::string &why) { return {false, why}; }

// 1. register insertion on the unbalanced add/mul/sub datapath
Outcome regularization() {
  const auto g = unbalanced_graph();
  const auto r = stitch::regularize_datapath(g, [&](std::size_t v) {
    return ops::default_latency(g.vertices[v].op.kind.op, 32);
  });
  std::map<std::pair<std::size_t, std::uint32_t>, std::uint32_t> delay; // (vertex, port) -> cycles
  for (const auto &d : r.delays) {
    if (d.site != stitch::DelaySite::Input) return fail_with("unexpected delay off an input operand");
    const auto &in = g.ext_inputs[d.index];
    delay[{in.dst, in.port}] = d.cycles;
  }
  const std::map<std::pair<std::size_t, std::uint32_t>, std::uint32_t> want = {{{1, 1}, 1}, {{2, 0}, 7}};
  if (delay != want) return fail_with("delays differ from {mul.R: 1, sub.L: 7}");
  return {true, "mul right operand +1, sub left operand +7, latency " + std::to_string(r.total_latency)};
}

// 2. kernel I/O of the four benchmarks, per-application mining
Outcome kernel_io() {
  const std::map<std::string, std::pair<std::size_t, std::size_t>> want = {
      {"matmul", {3, 1}}, {"outer", {2, 1}}, {"robert", {4, 1}}, {"smooth", {10, 1}}};
  const auto t0 = std::chrono::steady_clock::now();
  std::string got;
  bool ok = true;
  for (const auto &name : benchmark_names()) {
    const auto ks = benchmark_kernels(load_benchmark(name));
    if (ks.empty()) return fail_with(name + ": no kernels");
    const std::pair<std::size_t, std::size_t> io{ks[0].inputs.size(), ks[0].outputs.size()};
    ok &= io == want.at(name);
    got += name + " (" + std::to_string(io.first) + "," + std::to_string(io.second) + ") ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f s", secs);
  got += buf;
  if (secs >= 10.0) return fail_with(got + " exceeds 10 s");
  return {ok, got};
}

// 3 + 5. mined frequent sets equal brute force; support never grows down the code tree
struct OracleRun {
  std::size_t sets = 0, mismatches = 0, patterns = 0, steps = 0, violations = 0;
};

const OracleRun &oracle_runs() {
  static const OracleRun run = [] {
    OracleRun r;
    std::mt19937_64 rng(20240501);
    for (; r.sets < 150; ++r.sets) {
      const auto gs = random_transactions(rng);
      miner::MiningConfig cfg;
      cfg.min_support = 2;
      cfg.report_maximal_only = false;
      cfg.record_trace = true;
      const auto res = miner::mine_patterns(gs, cfg);
      const auto brute = brute_frequent(gs, 2);
      if (mined_frequent(res) != brute || res.patterns.size() != brute.size()) ++r.mismatches;
      r.patterns += brute.size();
      for (const auto &s : res.trace) {
        ++r.steps;
        r.violations += s.child_support > s.parent_support;
      }
    }
    return r;
  }();
  return run;
}

Outcome mining_oracle() {
  const auto &r = oracle_runs();
  const auto d = std::to_string(r.sets) + " transaction sets, " + std::to_string(r.patterns) + " frequent patterns, " +
                 std::to_string(r.mismatches) + " mismatches";
  return {r.mismatches == 0, d};
}

Outcome anti_monotone() {
  const auto &r = oracle_runs();
  const auto d = std::to_string(r.steps) + " parent/child steps, " + std::to_string(r.violations) + " violations";
  return {r.steps > 0 && r.violations == 0, d};
}

// 4. minimum codes survive vertex renumbering
Outcome canonical_invariance() {
  std::mt19937_64 rng(4242);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto g = random_connected_dag(rng, 2 + rng() % 9, 1 + rng() % 4);
    const auto h = graph::permute(g, random_permutation(rng, g.size()));
    bad += !(graph::min_dfs_code(g) == graph::min_dfs_code(h));
  }
  return {bad == 0, "1000 graphs, " + std::to_string(bad) + " differing codes"};
}

// 6. cycle-accurate netlist == interpreter, first result at netlist latency
std::string check_netlist(const stitch::Netlist &n, std::mt19937_64 &rng) {
  const auto w = random_workload(rng, n, 1000);
  const auto r = sim::simulate_netlist(n, w);
  if (r.results.size() != 1000) return n.name + ": " + std::to_string(r.results.size()) + " results";
  if (!r.first_valid || *r.first_valid != n.latency)
    return n.name + ": first valid output at " + (r.first_valid ? std::to_string(*r.first_valid) : "never") +
           ", latency " + std::to_string(n.latency);
  for (std::size_t k = 0; k < 1000; ++k)
    if (r.results[k] != sim::interpret_dfg(n.source, w.vector_at(k))) return n.name + ": vector " + std::to_string(k) + " differs";
  return {};
}

Outcome functional_latency() {
  const auto lib = hwlib::default_library();
  std::mt19937_64 rng(66);
  std::size_t kernels = 0;
  for (const auto &name : benchmark_names())
    for (const auto &k : benchmark_kernels(load_benchmark(name))) {
      auto n = stitch::stitch_kernel(k, lib);
      n.name = name + "/" + n.name;
      if (auto e = check_netlist(n, rng); !e.empty()) return fail_with(e);
      ++kernels;
    }
  const auto bench = kernels;
  for (int i = 0; i < 100; ++i) {
    const auto g = random_kernel(rng, 1 + rng() % 10);
    const auto n = stitch::stitch_dfg(g, lib, "random" + std::to_string(i));
    if (auto e = check_netlist(n, rng); !e.empty()) return fail_with(e);
    ++kernels;
  }
  return {true, std::to_string(bench) + " benchmark + 100 random kernels x 1000 vectors"};
}

// 7. hwcall rewrite preserves program results and memory
bool is_size_param(const std::string &p) { return p == "n" || p == "m" || p == "w" || p == "h" || p == "count"; }

Outcome rewrite_soundness() {
  std::mt19937_64 rng(77);
  std::size_t runs = 0, calls = 0;
  for (const auto &name : benchmark_names()) {
    const auto m = load_benchmark(name);
    const auto ks = benchmark_kernels(m);
    const auto hw = miner::inject_hwcalls(m, ks);
    sim::KernelTable table;
    for (const auto &k : ks) table[k.id] = k.dfg;
    for (const auto &f : hw.functions)
      for (const auto &b : f.blocks)
        for (const auto &i : b.instructions) calls += i.op() == Opcode::HwCall;
    for (const auto &f : m.functions)
      for (int t = 0; t < 1000; ++t) {
        std::vector<std::uint64_t> args;
        sim::Memory mem;
        std::uint64_t base = 0x1000;
        for (const auto &p : f.params) {
          if (is_size_param(p.name)) {
            args.push_back(1 + rng() % 5);
          } else {
            args.push_back(base);
            for (std::uint64_t a = base; a < base + 64; ++a) mem[a] = rng() % 1024;
            base += 0x1000;
          }
        }
        const auto want = sim::interpret_ir(m, f.name, args, mem);
        const auto got = sim::interpret_ir(hw, f.name, args, mem, table);
        if (want.value != got.value || want.memory != got.memory)
          return fail_with(name + "/" + f.name + " differs on run " + std::to_string(t));
        ++runs;
      }
  }
  return {calls > 0, std::to_string(runs) + " runs, " + std::to_string(calls) + " hwcall sites"};
}

// 8. AS overlay vs generic-ALU overlay vs bare kernels
Outcome comparative() {
  const auto lib = hwlib::default_library();
  std::mt19937_64 rng(88);
  std::string d;
  for (const auto &name : benchmark_names()) {
    const auto ks = benchmark_kernels(load_benchmark(name));
    const auto core = stitch::stitch_kernel(ks[0], lib);
    auto o = stitch::make_overlay(3, 3);
    std::map<std::string, stitch::Netlist> assign;
    std::map<std::string, sim::Workload> schedule;
    for (std::size_t i = 0; i < o.size(); ++i) {
      assign[o.slot_name(i)] = core;
      schedule[o.slot_name(i)] = random_workload(rng, core, 64);
    }
    o = stitch::fill_blackboxes(o, assign);
    const auto rep = sim::simulate_overlay(o, schedule, lib);
    if (!rep.oracle_ok) return fail_with(name + ": oracle mismatch");
    if (!(rep.as_cycles < rep.alu_cycles))
      return fail_with(name + ": AS " + std::to_string(rep.as_cycles) + " cycles vs ALU " + std::to_string(rep.alu_cycles));
    const auto res = stitch::estimate_resources(o, lib);
    if (!(res.alu.total.lut > res.as.total.lut && res.as.total.lut > res.bare.total.lut))
      return fail_with(name + ": LUT order broken");
    if (!(res.as.total.ff > res.bare.total.ff)) return fail_with(name + ": FF order broken");
    d += name + " " + std::to_string(rep.as_cycles) + "<" + std::to_string(rep.alu_cycles) + " ";
  }
  // the multiply kernel: outer product
  const auto ks = benchmark_kernels(load_benchmark("outer"));
  if (ks[0].dfg.size() != 1 || ks[0].dfg.vertices[0].op.kind.op != Opcode::Mul) return fail_with("outer kernel is not a lone multiply");
  const auto core = stitch::stitch_kernel(ks[0], lib);
  for (std::uint32_t g = 2; g <= 10; ++g) {
    auto o = stitch::make_overlay(g, g);
    std::map<std::string, stitch::Netlist> assign;
    for (std::size_t i = 0; i < o.size(); ++i) assign[o.slot_name(i)] = core;
    o = stitch::fill_blackboxes(o, assign);
    const auto res = stitch::estimate_resources(o, lib);
    const auto want = 4ull * o.size();
    if (res.as.total.dsp != want || res.alu.total.dsp != want || res.bare.total.dsp != want)
      return fail_with("dsp differs at grid " + std::to_string(g));
  }
  return {true, d + "| dsp 4/PE in every flavor"};
}

// 9. three branch-linked kernels merged onto one PE
Outcome merged_kernel() {
  const auto lib = hwlib::default_library();
  const auto m = ir::parse_ir(kBranchIr, "branchy");
  const auto ks = benchmark_kernels(m, 1);
  Diagnostics diags;
  const auto merged = miner::merge_kernels(ks, m, 0, &diags);
  const miner::MergedKernel *mk = nullptr;
  for (const auto &x : merged)
    if (x.merged()) mk = &x;
  if (!mk || mk->kernel_ids.size() != 3) return fail_with("no three-kernel merge");
  std::size_t demux = 0, regs = 0;
  for (const auto &v : mk->dfg.vertices) {
    demux += v.op.kind.op == Opcode::Demux;
    regs += v.op.kind.op == Opcode::Register;
  }
  if (demux != 1 || regs != 2) return fail_with("expected 1 demux and 2 registers");

  // functional: merged graph against the program itself
  std::mt19937_64 rng(99);
  const auto tags = mk->dfg.input_tags();
  std::size_t out_t = SIZE_MAX, out_v = SIZE_MAX;
  for (std::size_t i = 0; i < mk->outputs.size(); ++i) {
    if (mk->outputs[i] == "t") out_t = i;
    if (mk->outputs[i] == "v") out_v = i;
  }
  if (out_t == SIZE_MAX || out_v == SIZE_MAX) return fail_with("merged kernel lacks branch results");
  for (int t = 0; t < 1000; ++t) {
    const std::uint64_t x = rng() % 100000, y = rng() % 100000, z = rng() % 100000;
    const auto want = sim::interpret_ir(m, "branchy", {x, y, z});
    std::vector<std::uint64_t> in;
    for (const auto &tag : tags) {
      if (tag == "x") in.push_back(x);
      else if (tag == "y") in.push_back(y);
      else if (tag == "z") in.push_back(z);
      else in.push_back(static_cast<std::uint64_t>(std::stoll(tag.substr(1))));
    }
    const auto got = sim::interpret_dfg(mk->dfg, in);
    const std::int64_t a = static_cast<std::int32_t>(ops::mask(x * y + z, 32));
    const bool taken = a < static_cast<std::int32_t>(y);
    if ((taken ? got[out_t] : got[out_v]) != *want.value)
      return fail_with("merged kernel differs from the program at run " + std::to_string(t));
  }

  // cycles: merged on one PE vs the three kernels run back to back
  const auto core = stitch::stitch_kernel(*mk, lib);
  const auto w = random_workload(rng, core, 256);
  const auto merged_run = sim::simulate_pe(stitch::wrap_pe(core), w);
  std::uint64_t chained = 0;
  for (auto id : mk->kernel_ids) {
    const auto kn = stitch::stitch_kernel(ks[id], lib);
    chained += sim::simulate_pe(stitch::wrap_pe(kn), random_workload(rng, kn, 256)).total_cycles;
  }
  const auto d = "merged " + std::to_string(merged_run.total_cycles) + " <= chained " + std::to_string(chained);
  if (merged_run.total_cycles > chained) return fail_with(d);
  return {true, d};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"regularization delays exact", regularization},
      {"benchmark kernel I/O", kernel_io},
      {"mining equals brute-force enumeration", mining_oracle},
      {"canonical code invariance", canonical_invariance},
      {"anti-monotone support", anti_monotone},
      {"netlist simulation equals interpreter at exact latency", functional_latency},
      {"hwcall rewrite soundness", rewrite_soundness},
      {"AS vs ALU vs bare direction", comparative},
      {"merged kernel benefit", merged_kernel},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = fail_with(std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return failures ? 1 : 0;
}
