#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "overlayforge/interp.hpp"
#include "overlayforge/overlay.hpp"

namespace overlayforge::sim {

// Named input streams of equal length.
struct Workload {
  std::vector<std::string> names;
  std::vector<std::vector<std::uint64_t>> streams;

  std::size_t length() const { return streams.empty() ? 0 : streams.front().size(); }
  std::vector<std::uint64_t> vector_at(std::size_t i) const {
    std::vector<std::uint64_t> v;
    for (const auto &s : streams) v.push_back(s[i]);
    return v;
  }
  void validate() const {
    if (names.size() != streams.size()) fail(ErrorKind::Simulation, "workload has ", names.size(), " names for ", streams.size(), " streams");
    for (const auto &s : streams)
      if (s.size() != length()) fail(ErrorKind::Simulation, "workload streams differ in length");
  }
};

inline Workload read_workload_csv(std::string_view text) {
  Workload w;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string &s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      out.push_back(cell);
    }
    return out;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (w.names.empty()) {
      w.names = cells;
      w.streams.resize(cells.size());
      continue;
    }
    if (cells.size() != w.names.size())
      throw ParseError(ErrorKind::Syntax, "row has " + std::to_string(cells.size()) + " fields, header has " +
                                              std::to_string(w.names.size()), lineno, 1);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        const auto v = cells[i].starts_with('-') ? static_cast<std::uint64_t>(std::stoll(cells[i], &used))
                                                 : std::stoull(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument("trailing characters");
        w.streams[i].push_back(v);
      } catch (const std::exception &) {
        throw ParseError(ErrorKind::Syntax, "'" + cells[i] + "' is not a decimal integer", lineno, 1);
      }
    }
  }
  return w;
}

inline std::string write_workload_csv(const Workload &w) {
  std::ostringstream os;
  for (std::size_t i = 0; i < w.names.size(); ++i) os << (i ? "," : "") << w.names[i];
  os << '\n';
  for (std::size_t r = 0; r < w.length(); ++r) {
    for (std::size_t i = 0; i < w.streams.size(); ++i) os << (i ? "," : "") << w.streams[i][r];
    os << '\n';
  }
  return os.str();
}

// Streams ordered like the netlist's input ports, matched by port name, then
// by tag, then by position when the counts agree. Ports carrying a literal
// ("#v") that the workload does not name are fed the constant.
inline std::vector<std::vector<std::uint64_t>> bind_inputs(const stitch::Netlist &n, const Workload &w) {
  w.validate();
  auto named = [&](const stitch::Port &p) -> const std::vector<std::uint64_t> * {
    auto it = std::find(w.names.begin(), w.names.end(), p.name);
    if (it == w.names.end()) it = std::find(w.names.begin(), w.names.end(), p.tag);
    return it == w.names.end() ? nullptr : &w.streams[static_cast<std::size_t>(it - w.names.begin())];
  };
  auto literal = [](const stitch::Port &p) -> std::optional<std::uint64_t> {
    if (!p.tag.starts_with('#')) return std::nullopt;
    return static_cast<std::uint64_t>(std::stoll(p.tag.substr(1)));
  };
  std::vector<std::vector<std::uint64_t>> out;
  bool by_name = true;
  for (const auto &p : n.inputs) {
    if (const auto *s = named(p)) {
      out.push_back(*s);
    } else if (auto c = literal(p)) {
      out.emplace_back(w.length(), *c);
    } else {
      by_name = false;
      break;
    }
  }
  if (by_name && (!n.inputs.empty() || w.streams.empty())) return out;
  // positional: the workload covers every port, or every non-literal port
  if (w.streams.size() == n.inputs.size()) return w.streams;
  out.clear();
  std::size_t next = 0;
  for (const auto &p : n.inputs) {
    if (auto c = literal(p)) {
      out.emplace_back(w.length(), *c);
    } else {
      if (next == w.streams.size()) break;
      out.push_back(w.streams[next++]);
    }
  }
  if (out.size() != n.inputs.size() || next != w.streams.size())
    fail(ErrorKind::Simulation, n.name, " has ", n.inputs.size(), " input ports, workload has ", w.streams.size(), " streams");
  return out;
}

struct SimResult {
  std::vector<std::string> ports;                                // output port names
  std::vector<std::vector<std::optional<std::uint64_t>>> trace;  // [cycle][port]
  std::vector<std::vector<std::uint64_t>> results;               // one row per input vector
  std::vector<std::uint64_t> result_cycles;
  std::uint64_t total_cycles = 0;
  std::optional<std::uint64_t> first_valid;
  double throughput = 0.0; // results per cycle at steady state
  ops::EvalFlags flags;
};

inline double steady_throughput(const std::vector<std::uint64_t> &cycles) {
  if (cycles.empty()) return 0.0;
  if (cycles.size() == 1) return 1.0;
  return static_cast<double>(cycles.size() - 1) / static_cast<double>(cycles.back() - cycles.front());
}

// Cycle-accurate run: vector k enters at cycle k * II (II = the slowest
// cell's initiation interval); a cell's result appears `latency` cycles
// after all its operands are valid together.
inline SimResult simulate_netlist(const stitch::Netlist &n, const Workload &w) {
  const auto streams = bind_inputs(n, w);
  const std::size_t N = w.length();
  const std::uint64_t ii = n.issue_interval();
  SimResult r;
  for (const auto &p : n.outputs) r.ports.push_back(p.name);
  if (N == 0) return r;

  const auto C = n.cells.size();
  std::vector<std::vector<std::optional<stitch::Pin>>> driver(C);
  for (std::size_t c = 0; c < C; ++c) driver[c].assign(n.cells[c].inputs, std::nullopt);
  std::vector<std::optional<stitch::Pin>> out_driver(n.outputs.size());
  std::vector<std::set<std::size_t>> succ(C);
  for (const auto &net : n.nets)
    for (const auto &s : net.sinks) {
      auto &slot = s.cell == stitch::kTopPort ? out_driver.at(s.pin) : driver.at(static_cast<std::size_t>(s.cell)).at(s.pin);
      if (slot) fail(ErrorKind::Simulation, "a pin of ", n.name, " is driven by more than one net");
      slot = net.driver;
      if (s.cell != stitch::kTopPort && net.driver.cell != stitch::kTopPort)
        succ[static_cast<std::size_t>(net.driver.cell)].insert(static_cast<std::size_t>(s.cell));
    }
  for (std::size_t c = 0; c < C; ++c)
    for (const auto &d : driver[c])
      if (!d) fail(ErrorKind::Simulation, "cell ", c, " of ", n.name, " has an undriven input");
  for (const auto &d : out_driver)
    if (!d) fail(ErrorKind::Simulation, "an output of ", n.name, " is undriven");

  // topological order of cells
  std::vector<std::size_t> indeg(C, 0), order;
  for (std::size_t c = 0; c < C; ++c)
    for (auto s : succ[c]) ++indeg[s];
  for (std::size_t c = 0; c < C; ++c)
    if (!indeg[c]) order.push_back(c);
  for (std::size_t i = 0; i < order.size(); ++i)
    for (auto s : succ[order[i]])
      if (--indeg[s] == 0) order.push_back(s);
  if (order.size() != C) fail(ErrorKind::Cyclic, n.name, " contains a combinational or register loop");

  const std::uint64_t T = (N - 1) * ii + n.latency + 1;
  std::uint32_t max_lat = 0;
  for (const auto &c : n.cells) max_lat = std::max(max_lat, c.latency);
  using Value = std::optional<std::vector<std::uint64_t>>;
  std::vector<std::vector<Value>> hist(C, std::vector<Value>(T + max_lat + 1));
  auto read = [&](const stitch::Pin &p, std::uint64_t t) -> std::optional<std::uint64_t> {
    if (p.cell == stitch::kTopPort) {
      if (t % ii || t / ii >= N) return std::nullopt;
      return streams.at(p.pin)[t / ii];
    }
    const auto &h = hist[static_cast<std::size_t>(p.cell)][t];
    if (!h) return std::nullopt;
    return h->at(p.pin);
  };

  r.trace.resize(T);
  std::vector<std::uint64_t> in;
  for (std::uint64_t t = 0; t < T; ++t) {
    for (auto c : order) {
      const auto &cell = n.cells[c];
      in.clear();
      std::size_t valid = 0;
      for (const auto &d : driver[c]) {
        auto v = read(*d, t);
        valid += v.has_value();
        in.push_back(v.value_or(0));
      }
      if (valid == 0) continue;
      if (valid != in.size())
        fail(ErrorKind::Simulation, "operands of cell ", c, " (", cell.kind, ") in ", n.name, " are misaligned at cycle ", t);
      hist[c][t + cell.latency] = eval_vertex(graph::Vertex{cell.op, cell.inputs}, in, &r.flags);
    }
    std::size_t valid = 0;
    for (std::size_t o = 0; o < out_driver.size(); ++o) {
      r.trace[t].push_back(read(*out_driver[o], t));
      valid += r.trace[t].back().has_value();
    }
    if (valid == 0) continue;
    if (valid != out_driver.size()) fail(ErrorKind::Simulation, "outputs of ", n.name, " are misaligned at cycle ", t);
    std::vector<std::uint64_t> row;
    for (const auto &v : r.trace[t]) row.push_back(*v);
    r.results.push_back(std::move(row));
    r.result_cycles.push_back(t);
  }
  r.total_cycles = T;
  if (!r.result_cycles.empty()) r.first_valid = r.result_cycles.front();
  r.throughput = steady_throughput(r.result_cycles);
  return r;
}

inline std::string trace_csv(const SimResult &r) {
  std::ostringstream os;
  os << "cycle";
  for (const auto &p : r.ports) os << ',' << p;
  os << '\n';
  for (std::size_t t = 0; t < r.trace.size(); ++t) {
    os << t;
    for (const auto &v : r.trace[t]) {
      os << ',';
      if (v) os << *v;
    }
    os << '\n';
  }
  return os.str();
}

struct PeRun {
  std::vector<std::vector<std::uint64_t>> results;
  std::vector<std::uint64_t> result_cycles;
  std::uint64_t total_cycles = 0;
  std::optional<std::uint64_t> first_output;
  double throughput = 0.0;
  std::uint64_t stall_cycles = 0; // cycles the host could not push
};

// The PE shell around a core: host writes one vector per cycle into the
// input queues; the controller pops when an output slot is guaranteed, the
// core runs for control_latency cycles and results pass the output register
// into the output queue, which the host drains one per cycle.
inline PeRun simulate_pe(const stitch::PeModel &pe, const Workload &w) {
  if (!pe.core) fail(ErrorKind::Slot, "cannot simulate a black-box PE");
  const auto core = simulate_netlist(*pe.core, w);
  PeRun run;
  const std::size_t N = w.length();
  if (N == 0) return run;
  if (core.results.size() != N) fail(ErrorKind::Simulation, "core produced ", core.results.size(), " of ", N, " results");
  const std::uint64_t ii = pe.core->issue_interval();
  const std::uint64_t L = pe.control_latency;

  std::deque<std::pair<std::uint64_t, std::size_t>> in_q;   // (ready cycle, vector)
  std::deque<std::pair<std::uint64_t, std::size_t>> flight; // (cycle it reaches the output queue, vector)
  std::deque<std::size_t> out_q;
  std::size_t pushed = 0;
  std::optional<std::uint64_t> last_issue;
  for (std::uint64_t t = 0; run.results.size() < N; ++t) {
    if (t > 1'000'000'000ull) fail(ErrorKind::Simulation, "PE simulation does not drain");
    while (!flight.empty() && flight.front().first == t) {
      out_q.push_back(flight.front().second);
      flight.pop_front();
    }
    if (!out_q.empty()) {
      run.results.push_back(core.results[out_q.front()]);
      run.result_cycles.push_back(t);
      out_q.pop_front();
    }
    const bool can_issue = !last_issue || t >= *last_issue + ii;
    if (!in_q.empty() && in_q.front().first <= t && can_issue && out_q.size() + flight.size() < pe.out_queue_depth) {
      // input register at t, core from t+1, output register at t+1+L
      flight.emplace_back(t + L + 2, in_q.front().second);
      in_q.pop_front();
      last_issue = t;
    }
    if (pushed < N) {
      if (in_q.size() < pe.in_queue_depth)
        in_q.emplace_back(t + 1, pushed++);
      else
        ++run.stall_cycles;
    }
  }
  run.total_cycles = run.result_cycles.back() + 1;
  run.first_output = run.result_cycles.front();
  run.throughput = steady_throughput(run.result_cycles);
  return run;
}

// Generic-ALU execution of the same kernel: one operation per issue in
// topological order, each costing a select cycle plus its latency.
inline PeRun simulate_alu(const graph::Dfg &kernel, const stitch::AluModel &alu, const Workload &w) {
  PeRun run;
  const auto order = kernel.topo_order();
  if (!order) fail(ErrorKind::Cyclic, "cannot sequence a cyclic kernel");
  std::uint64_t per_vector = 0;
  for (auto v : *order) {
    const auto op = kernel.vertices[v].op.kind.op;
    auto it = alu.latency.find(op);
    per_vector += 1 + (it == alu.latency.end() ? 1 : it->second);
  }
  std::uint64_t t = stitch::kPeLatencyOverhead;
  for (std::size_t k = 0; k < w.length(); ++k) {
    t += per_vector;
    run.results.push_back(interpret_dfg(kernel, w.vector_at(k)));
    run.result_cycles.push_back(t - 1);
  }
  if (!run.result_cycles.empty()) {
    run.total_cycles = run.result_cycles.back() + 1;
    run.first_output = run.result_cycles.front();
    run.throughput = steady_throughput(run.result_cycles);
  }
  return run;
}

struct PeReport {
  std::string slot;
  std::string kernel;
  PeRun as;
  PeRun alu;
  bool oracle_ok = true;
  std::string divergence; // first mismatch against the reference interpreter
};

struct OverlayReport {
  std::vector<PeReport> pes;
  std::uint64_t as_cycles = 0;  // PEs run in parallel: the slowest one
  std::uint64_t alu_cycles = 0;
  bool oracle_ok = true;
};

// Workload streams in the order of the core's input ports.
inline Workload ordered_workload(const stitch::Netlist &n, const Workload &w) {
  Workload out;
  for (const auto &p : n.inputs) out.names.push_back(p.name);
  out.streams = bind_inputs(n, w);
  return out;
}

inline OverlayReport simulate_overlay(const stitch::OverlayModel &o, const std::map<std::string, Workload> &schedule,
                                      const hwlib::PrimitiveLibrary &lib) {
  OverlayReport rep;
  const auto alu = stitch::generic_alu(lib, o.queue_depth);
  for (const auto &[slot, work] : schedule) {
    const auto idx = o.slot_index(slot);
    if (!idx) fail(ErrorKind::Slot, "workload for nonexistent slot '", slot, "'");
    const auto &pe = o.slots[*idx];
    if (!pe.core) fail(ErrorKind::Slot, "workload for unassigned slot '", slot, "'");
    const auto w = ordered_workload(*pe.core, work);
    PeReport r;
    r.slot = slot;
    r.kernel = pe.core->name;
    r.as = simulate_pe(pe, w);
    r.alu = simulate_alu(pe.core->source, alu, w);
    for (std::size_t k = 0; k < w.length() && r.oracle_ok; ++k) {
      const auto want = interpret_dfg(pe.core->source, w.vector_at(k));
      if (r.as.results[k] != want || r.alu.results[k] != want) {
        r.oracle_ok = false;
        std::ostringstream os;
        os << "slot " << slot << " vector " << k << ": expected";
        for (auto v : want) os << ' ' << v;
        os << ", got";
        for (auto v : r.as.results[k]) os << ' ' << v;
        r.divergence = os.str();
      }
    }
    rep.as_cycles = std::max(rep.as_cycles, r.as.total_cycles);
    rep.alu_cycles = std::max(rep.alu_cycles, r.alu.total_cycles);
    rep.oracle_ok &= r.oracle_ok;
    rep.pes.push_back(std::move(r));
  }
  return rep;
}

} // namespace overlayforge::sim
