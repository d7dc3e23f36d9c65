#include <gtest/gtest.h>

#include "support.hpp"

using namespace testkit;

namespace {

Dfg add_mul() {
  Dfg g;
  const auto a = g.add_vertex("add");
  const auto m = g.add_vertex("mul");
  g.add_edge(a, m, 0);
  return g;
}

std::size_t count_op(const Dfg &g, Opcode op) {
  std::size_t n = 0;
  for (const auto &v : g.vertices) n += v.op.kind.op == op;
  return n;
}

std::size_t count_hwcalls(const ir::IrModule &m) {
  std::size_t n = 0;
  for (const auto &f : m.functions)
    for (const auto &b : f.blocks)
      for (const auto &i : b.instructions) n += i.op() == Opcode::HwCall;
  return n;
}

// Two independent multiply-adds in one block, one in another function.
const char *kTwoMacs = R"(fn f(a, b, c, d) {
bb0:
  x = mul a, b;
  y = add x, c;
  p = mul c, d;
  q = add p, a;
  store y, a;
  store q, b;
  ret;
}
fn g(a, b, c) {
bb0:
  x = mul a, b;
  y = add x, c;
  ret y;
}
)";

} // namespace

TEST(Mine, IdenticalPairIsOneMaximalPattern) {
  const std::vector<Dfg> gs = {add_mul(), add_mul()};
  const auto r = miner::mine_patterns(gs, {});
  ASSERT_EQ(r.patterns.size(), 1u);
  EXPECT_EQ(r.patterns[0].support, 2u);
  EXPECT_EQ(r.patterns[0].graph.size(), 2u);
  EXPECT_TRUE(graph::is_isomorphic(r.patterns[0].graph, add_mul()));
  EXPECT_EQ(r.patterns[0].embeddings.size(), 2u);
}

TEST(Mine, AllFrequentIncludesSubpatterns) {
  const std::vector<Dfg> gs = {add_mul(), add_mul()};
  miner::MiningConfig cfg;
  cfg.report_maximal_only = false;
  EXPECT_EQ(miner::mine_patterns(gs, cfg).patterns.size(), 3u); // add, mul, add->mul
}

TEST(Mine, SupportAboveTransactionCountIsEmpty) {
  const std::vector<Dfg> gs = {add_mul(), add_mul()};
  miner::MiningConfig cfg;
  cfg.min_support = 3;
  EXPECT_TRUE(miner::mine_patterns(gs, cfg).patterns.empty());
  EXPECT_TRUE(miner::mine_kernels(gs, cfg).empty());
}

TEST(Mine, SupportCountsTransactionsNotEmbeddings) {
  Dfg g;
  for (int i = 0; i < 4; ++i) g.add_vertex("mul");
  miner::MiningConfig cfg;
  cfg.min_support = 2;
  EXPECT_TRUE(miner::mine_patterns({g}, cfg).patterns.empty());
  cfg.min_support = 1;
  const auto r = miner::mine_patterns({g}, cfg);
  ASSERT_EQ(r.patterns.size(), 1u);
  EXPECT_EQ(r.patterns[0].support, 1u);
  EXPECT_EQ(r.patterns[0].embeddings.size(), 4u);
}

TEST(Mine, RejectsBadConfigAndEmptyInput) {
  miner::MiningConfig cfg;
  cfg.min_support = 0;
  EXPECT_THROW(miner::mine_patterns({add_mul()}, cfg), Error);
  EXPECT_THROW(miner::mine_kernels({}, {}), Error);
}

TEST(Mine, Deterministic) {
  for (const auto &name : benchmark_names()) {
    const auto m = load_benchmark(name);
    const auto a = benchmark_kernels(m), b = benchmark_kernels(m);
    ASSERT_EQ(a.size(), b.size()) << name;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].dfg, b[i].dfg) << name;
      EXPECT_EQ(a[i].canonical, b[i].canonical) << name;
      EXPECT_EQ(a[i].embeddings, b[i].embeddings) << name;
    }
  }
}

TEST(Mine, FrozenMatmulKernel) {
  const auto ks = benchmark_kernels(load_benchmark("matmul"));
  ASSERT_FALSE(ks.empty());
  const auto &k = ks[0];
  EXPECT_EQ(graph::write_dfg(k.dfg), "v 0 add\nv 1 mul\nv 2 in\nv 3 in\nv 4 in\nv 5 out\n"
                                     "e 0 1 0 R\ne 1 2 0 L\ne 2 3 1 L\ne 3 4 1 R\ne 4 0 5 L\n");
  EXPECT_EQ(graph::to_string(k.canonical), "[(0,1,add,(fwd,L),store) (0,2,add,(rev,L),load) (0,3,add,(rev,R),mul) "
                                                  "(3,4,mul,(rev,L),load) (3,5,mul,(rev,R),load)]");
  EXPECT_EQ(k.support, 2u);
  EXPECT_EQ(k.inputs.size(), 3u);
  EXPECT_EQ(k.outputs.size(), 1u);
}

TEST(Mine, KernelsOrderedByWeight) {
  for (const auto &name : benchmark_names()) {
    const auto ks = benchmark_kernels(load_benchmark(name));
    for (std::size_t i = 1; i < ks.size(); ++i) EXPECT_GE(ks[i - 1].weight(), ks[i].weight()) << name;
    for (std::size_t i = 0; i < ks.size(); ++i) EXPECT_EQ(ks[i].id, i);
  }
}

TEST(Prune, LoadComputeStore) {
  Dfg g;
  const auto ld = g.add_vertex("load");
  const auto add = g.add_vertex("add");
  const auto st = g.add_vertex("store");
  g.add_input(ld, 0, "p");
  g.add_edge(ld, add, 0);
  g.add_input(add, 1, "x");
  g.add_edge(add, st, 0);
  g.add_input(st, 1, "p");
  const auto r = miner::prune(g);
  ASSERT_EQ(r.dfg.size(), 1u);
  EXPECT_EQ(r.dfg.vertices[0].label(), "add");
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{add}));
  EXPECT_EQ(r.dfg.input_tags(), (std::vector<std::string>{"v0", "x"}));
  EXPECT_EQ(r.dfg.ext_outputs.size(), 1u);
}

TEST(Prune, MemoryOnlyGraphIsEmpty) {
  Dfg g;
  const auto ld = g.add_vertex("load");
  const auto st = g.add_vertex("store");
  g.add_input(ld, 0, "p");
  g.add_edge(ld, st, 0);
  g.add_input(st, 1, "q");
  EXPECT_TRUE(miner::prune_graph(g).empty());
}

TEST(Prune, ConversionsAreBypassed) {
  Dfg g;
  const auto add = g.add_vertex("add");
  const auto z = g.add_vertex("zext");
  const auto mul = g.add_vertex("mul");
  g.add_input(add, 0, "a");
  g.add_input(add, 1, "b");
  g.add_edge(add, z, 0);
  g.add_edge(z, mul, 1);
  g.add_input(mul, 0, "c");
  g.add_output(mul, "r");
  const auto r = miner::prune(g);
  ASSERT_EQ(r.dfg.size(), 2u);
  ASSERT_EQ(r.dfg.edges.size(), 1u);
  EXPECT_EQ(r.dfg.edges[0].port, 1u);
  EXPECT_EQ(r.bypassed, (std::vector<std::size_t>{z}));
}

TEST(Prune, Roles) {
  EXPECT_EQ(miner::prune_role(Opcode::Load), miner::PruneRole::Source);
  EXPECT_EQ(miner::prune_role(Opcode::Phi), miner::PruneRole::Source);
  EXPECT_EQ(miner::prune_role(Opcode::Store), miner::PruneRole::Sink);
  EXPECT_EQ(miner::prune_role(Opcode::Trunc), miner::PruneRole::Bypass);
  EXPECT_EQ(miner::prune_role(Opcode::Mul), miner::PruneRole::Keep);
}

TEST(Merge, IndependentKernelsAreWrapped) {
  const auto m = load_benchmark("matmul");
  const auto ks = benchmark_kernels(m);
  const auto merged = miner::merge_kernels(ks, m);
  ASSERT_EQ(merged.size(), ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    EXPECT_FALSE(merged[i].merged());
    EXPECT_EQ(merged[i].dfg, ks[i].dfg);
  }
}

TEST(Merge, BranchLinkedKernelsShareOneGraph) {
  const auto m = ir::parse_ir(kBranchIr, "branchy");
  const auto ks = benchmark_kernels(m, 1);
  const auto merged = miner::merge_kernels(ks, m);
  std::size_t groups = 0;
  for (const auto &mk : merged) {
    if (!mk.merged()) continue;
    ++groups;
    EXPECT_EQ(mk.kernel_ids.size(), 3u);
    EXPECT_EQ(count_op(mk.dfg, Opcode::Demux), 1u);
    EXPECT_EQ(count_op(mk.dfg, Opcode::Register), 2u);
    EXPECT_EQ(mk.condition_sources.size(), 1u);
    EXPECT_NO_THROW(mk.dfg.validate());
  }
  EXPECT_EQ(groups, 1u);
}

TEST(Merge, StraightChainMatchesProgram) {
  const auto m = ir::parse_ir(R"(fn f(x, y) {
bb0:
  a = mul x, y;
  b = add a, y;
  br bb1;
bb1:
  c = sub b, x;
  d = xor c, 255;
  ret d;
}
)");
  const auto ks = benchmark_kernels(m, 1);
  const miner::MergedKernel *mk = nullptr;
  const auto merged = miner::merge_kernels(ks, m);
  for (const auto &x : merged)
    if (x.merged()) mk = &x;
  ASSERT_NE(mk, nullptr);
  EXPECT_EQ(count_op(mk->dfg, Opcode::Demux), 0u);
  EXPECT_GE(count_op(mk->dfg, Opcode::Register), 1u);
  const auto out = std::find(mk->outputs.begin(), mk->outputs.end(), "d") - mk->outputs.begin();
  ASSERT_LT(static_cast<std::size_t>(out), mk->outputs.size());
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t x = rng() % 1000000, y = rng() % 1000000;
    std::vector<std::uint64_t> in;
    for (const auto &tag : mk->dfg.input_tags())
      in.push_back(tag == "x" ? x : tag == "y" ? y : static_cast<std::uint64_t>(std::stoll(tag.substr(1))));
    EXPECT_EQ(sim::interpret_dfg(mk->dfg, in)[out], *sim::interpret_ir(m, "f", {x, y}).value);
  }
}

TEST(Inject, NoKernelsLeavesModuleUnchanged) {
  const auto m = load_benchmark("smooth");
  EXPECT_EQ(ir::print_ir(miner::inject_hwcalls(m, {})), ir::print_ir(m));
}

TEST(Inject, MatmulBodyGetsCall) {
  const auto m = load_benchmark("matmul");
  const auto hw = miner::inject_hwcalls(m, benchmark_kernels(m));
  const auto &f = hw.functions[0];
  const auto &body = f.blocks[f.block_index("k.body")];
  std::size_t calls = 0;
  for (const auto &i : body.instructions) {
    if (i.op() != Opcode::HwCall) continue;
    ++calls;
    EXPECT_EQ(i.kernel, 0u);
    EXPECT_EQ(i.operands.size(), 3u);
    EXPECT_FALSE(i.lines.empty());
  }
  EXPECT_EQ(calls, 1u);
}

TEST(Inject, DisjointEmbeddingsBecomeSeparateCalls) {
  const auto m = ir::parse_ir(kTwoMacs);
  const auto ks = benchmark_kernels(m);
  ASSERT_FALSE(ks.empty());
  const auto hw = miner::inject_hwcalls(m, ks);
  std::size_t in_f = 0;
  for (const auto &i : hw.functions[0].blocks[0].instructions) in_f += i.op() == Opcode::HwCall;
  EXPECT_EQ(in_f, 2u);
  EXPECT_EQ(count_hwcalls(hw), 3u);

  sim::KernelTable table;
  for (const auto &k : ks) table[k.id] = k.dfg;
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::uint64_t a = rng() % 4096, b = rng() % 4096, c = rng() % 4096, d = rng() % 4096;
    EXPECT_EQ(sim::interpret_ir(hw, "f", {a, b, c, d}, {}, table).memory,
              sim::interpret_ir(m, "f", {a, b, c, d}).memory);
    EXPECT_EQ(sim::interpret_ir(hw, "g", {a, b, c}, {}, table).value, sim::interpret_ir(m, "g", {a, b, c}).value);
  }
}
