#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "overlayforge/dfg.hpp"
#include "overlayforge/hwlib.hpp"
#include "overlayforge/regularize.hpp"

namespace overlayforge::stitch {

using json = nlohmann::ordered_json;

inline constexpr std::int64_t kTopPort = -1;

// A cell pin, or (cell == kTopPort) a top-level port by index into
// Netlist::inputs (as a driver) or Netlist::outputs (as a sink).
struct Pin {
  std::int64_t cell = kTopPort;
  std::uint32_t pin = 0;
  friend auto operator<=>(const Pin &, const Pin &) = default;
};

struct Cell {
  std::size_t id = 0;
  std::string kind;      // primitive name ("add32", "demux32") or "delay"
  OpLabel op;            // behavior; delay cells are registers
  std::uint32_t latency = 0;
  std::uint32_t ii = 1;
  std::uint32_t inputs = 0;
  std::uint32_t outputs = 1;
  std::int64_t vertex = -1; // source vertex, -1 for inserted delay chains
  Resources resources;

  bool inserted() const { return vertex < 0; }
  friend bool operator==(const Cell &, const Cell &) = default;
};

struct Net {
  Pin driver;
  std::vector<Pin> sinks;
  std::uint32_t width = 32;
  friend bool operator==(const Net &, const Net &) = default;
};

struct Port {
  std::string name;
  std::uint32_t width = 32;
  std::string tag; // the kernel input/output tag it carries
  friend bool operator==(const Port &, const Port &) = default;
};

struct Netlist {
  std::string name;
  std::vector<Cell> cells;
  std::vector<Net> nets;
  std::vector<Port> inputs;
  std::vector<Port> outputs;
  std::uint32_t latency = 0;
  Resources resources;
  graph::Dfg source; // the kernel graph this was stitched from

  // Resources of the kernel's own cells, without inserted delay chains.
  Resources core_resources() const {
    Resources r;
    for (const auto &c : cells)
      if (!c.inserted()) r += c.resources;
    return r;
  }
  std::uint64_t delay_bits() const {
    std::uint64_t b = 0;
    for (const auto &c : cells)
      if (c.inserted()) b += c.resources.ff;
    return b;
  }
  std::size_t delay_cells() const {
    std::size_t n = 0;
    for (const auto &c : cells) n += c.inserted();
    return n;
  }
  std::uint32_t issue_interval() const {
    std::uint32_t ii = 1;
    for (const auto &c : cells) ii = std::max(ii, c.ii);
    return ii;
  }
  friend bool operator==(const Netlist &, const Netlist &) = default;
};

// Vertex widths must agree with their operand ports; a narrower value may
// feed a wider port (zero extension is plain wiring), never the reverse.
inline void check_widths(const graph::Dfg &g) {
  for (const auto &e : g.edges) {
    const auto have = value_width(g.vertices[e.src]);
    const auto want = operand_width(g.vertices[e.dst], e.port);
    if (have > want)
      fail(ErrorKind::WidthMismatch, "width mismatch: ", g.vertices[e.src].label(), " (", have, " bits) drives port ",
           graph::port_name(e.port), " of ", g.vertices[e.dst].label(), " (", want, " bits)");
  }
}

inline void check_ports(const graph::Dfg &g) {
  std::vector<std::vector<bool>> driven(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) driven[v].assign(g.vertices[v].arity, false);
  auto mark = [&](std::size_t v, std::uint32_t port) {
    if (port >= driven[v].size())
      fail(ErrorKind::InvalidGraph, g.vertices[v].label(), " vertex ", v, " has no port ", graph::port_name(port));
    driven[v][port] = true;
  };
  for (const auto &e : g.edges) mark(e.dst, e.port);
  for (const auto &in : g.ext_inputs) mark(in.dst, in.port);
  for (std::size_t v = 0; v < g.size(); ++v)
    for (std::uint32_t p = 0; p < driven[v].size(); ++p)
      if (!driven[v][p]) fail(ErrorKind::InvalidGraph, g.vertices[v].label(), " vertex ", v, " port ", graph::port_name(p), " is undriven");
  if (g.vertices.empty()) fail(ErrorKind::InvalidGraph, "kernel graph is empty");
  if (g.ext_outputs.empty()) fail(ErrorKind::InvalidGraph, "kernel graph has no outputs");
}

// One cell per vertex, nets following the edges and external I/O, and one
// delay cell per register chain the regularization inserts.
inline Netlist stitch_dfg(const graph::Dfg &g, const hwlib::PrimitiveLibrary &lib, std::string name = "kernel") {
  g.validate();
  check_ports(g);
  check_widths(g);
  std::vector<const hwlib::Primitive *> prim(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) prim[v] = &hwlib::lookup(lib, g.vertices[v].op.kind.op, g.vertices[v].op.width);
  const auto reg = regularize_datapath(g, [&](std::size_t v) { return prim[v]->latency; });

  Netlist n;
  n.name = std::move(name);
  n.source = g;
  n.latency = reg.total_latency;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto &vx = g.vertices[v];
    Cell c;
    c.id = v;
    c.kind = prim[v]->name();
    c.op = vx.op;
    c.latency = prim[v]->latency;
    c.ii = prim[v]->ii;
    c.inputs = vx.arity;
    c.vertex = static_cast<std::int64_t>(v);
    c.resources = prim[v]->resources;
    if (vx.op.kind.op == Opcode::Demux) {
      const std::uint32_t lanes = vx.arity > 0 ? vx.arity - 1 : 0;
      c.outputs = 2 * lanes;
      c.resources = prim[v]->resources * lanes;
    }
    n.cells.push_back(c);
  }
  for (const auto &t : g.input_tags()) {
    std::uint32_t w = 1;
    for (const auto &in : g.ext_inputs)
      if (in.tag == t) w = std::max(w, operand_width(g.vertices[in.dst], in.port));
    n.inputs.push_back({"in" + std::to_string(n.inputs.size()), w, t});
  }
  for (const auto &o : g.ext_outputs)
    n.outputs.push_back({"out" + std::to_string(n.outputs.size()), value_width(g.vertices[o.src]), o.tag});

  std::map<Pin, std::size_t> net_of;
  auto connect = [&](Pin driver, Pin sink, std::uint32_t width) {
    auto [it, fresh] = net_of.emplace(driver, n.nets.size());
    if (fresh) n.nets.push_back({driver, {}, width});
    n.nets[it->second].sinks.push_back(sink);
  };
  std::map<std::pair<DelaySite, std::size_t>, Delay> delay_of;
  for (const auto &d : reg.delays) delay_of[{d.site, d.index}] = d;
  auto route = [&](DelaySite site, std::size_t index, Pin driver, Pin sink, std::uint32_t width) {
    auto it = delay_of.find({site, index});
    if (it == delay_of.end()) {
      connect(driver, sink, width);
      return;
    }
    const auto &d = it->second;
    const auto &rp = hwlib::lookup(lib, Opcode::Register, 32);
    Cell c;
    c.id = n.cells.size();
    c.kind = "delay";
    c.op = OpLabel{{Opcode::Register}, d.width <= 8 ? 8u : d.width <= 16 ? 16u : d.width <= 32 ? 32u : 64u};
    c.latency = d.cycles * rp.latency;
    c.inputs = 1;
    c.resources = Resources{0, std::uint64_t{d.cycles} * d.width, 0, 0};
    n.cells.push_back(c);
    const Pin dp{static_cast<std::int64_t>(c.id), 0};
    connect(driver, dp, width);
    connect(dp, sink, width);
  };
  std::map<std::string, std::uint32_t> in_index;
  for (std::uint32_t i = 0; i < n.inputs.size(); ++i) in_index[n.inputs[i].tag] = i;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto &e = g.edges[i];
    route(DelaySite::Edge, i, {static_cast<std::int64_t>(e.src), e.src_port}, {static_cast<std::int64_t>(e.dst), e.port},
          value_width(g.vertices[e.src]));
  }
  for (std::size_t i = 0; i < g.ext_inputs.size(); ++i) {
    const auto &in = g.ext_inputs[i];
    route(DelaySite::Input, i, {kTopPort, in_index[in.tag]}, {static_cast<std::int64_t>(in.dst), in.port},
          n.inputs[in_index[in.tag]].width);
  }
  for (std::size_t i = 0; i < g.ext_outputs.size(); ++i) {
    const auto &o = g.ext_outputs[i];
    route(DelaySite::Output, i, {static_cast<std::int64_t>(o.src), o.src_port}, {kTopPort, static_cast<std::uint32_t>(i)},
          value_width(g.vertices[o.src]));
  }
  for (const auto &c : n.cells) n.resources += c.resources;
  return n;
}

// ---- serialization ----

inline json dfg_to_json(const graph::Dfg &g) {
  json j;
  j["vertices"] = json::array();
  for (const auto &v : g.vertices) j["vertices"].push_back({{"label", v.label()}, {"arity", v.arity}});
  j["edges"] = json::array();
  for (const auto &e : g.edges) j["edges"].push_back({e.src, e.dst, e.port, e.src_port});
  j["inputs"] = json::array();
  for (const auto &in : g.ext_inputs) j["inputs"].push_back({{"dst", in.dst}, {"port", in.port}, {"tag", in.tag}});
  j["outputs"] = json::array();
  for (const auto &o : g.ext_outputs) j["outputs"].push_back({{"src", o.src}, {"tag", o.tag}, {"src_port", o.src_port}});
  return j;
}

inline graph::Dfg dfg_from_json(const json &j) {
  graph::Dfg g;
  for (const auto &v : j.at("vertices")) {
    auto l = parse_label(v.at("label").get<std::string>());
    if (!l) fail(ErrorKind::Syntax, "bad vertex label '", v.at("label").get<std::string>(), "'");
    g.add_vertex(*l, v.at("arity").get<std::uint32_t>());
  }
  for (const auto &e : j.at("edges"))
    g.add_edge(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<std::uint32_t>(),
               e.at(3).get<std::uint32_t>());
  for (const auto &in : j.at("inputs"))
    g.add_input(in.at("dst").get<std::size_t>(), in.at("port").get<std::uint32_t>(), in.at("tag").get<std::string>());
  for (const auto &o : j.at("outputs"))
    g.add_output(o.at("src").get<std::size_t>(), o.at("tag").get<std::string>(), o.at("src_port").get<std::uint32_t>());
  g.validate();
  return g;
}

inline json resources_json(const Resources &r) {
  return {{"lut", r.lut}, {"ff", r.ff}, {"dsp", r.dsp}, {"bram", r.bram}};
}

inline Resources resources_from_json(const json &j) {
  return {j.at("lut").get<std::uint64_t>(), j.at("ff").get<std::uint64_t>(), j.at("dsp").get<std::uint64_t>(),
          j.at("bram").get<std::uint64_t>()};
}

inline json pin_json(const Netlist &n, const Pin &p, bool driver) {
  if (p.cell == kTopPort) return {{"port", driver ? n.inputs.at(p.pin).name : n.outputs.at(p.pin).name}};
  return {{"cell", p.cell}, {"pin", p.pin}};
}

inline json to_json(const Netlist &n) {
  json j;
  j["name"] = n.name;
  j["latency"] = n.latency;
  j["resources"] = resources_json(n.resources);
  j["ports"] = json::array();
  for (const auto &p : n.inputs)
    j["ports"].push_back({{"name", p.name}, {"direction", "in"}, {"width", p.width}, {"tag", p.tag}});
  for (const auto &p : n.outputs)
    j["ports"].push_back({{"name", p.name}, {"direction", "out"}, {"width", p.width}, {"tag", p.tag}});
  j["cells"] = json::array();
  for (const auto &c : n.cells)
    j["cells"].push_back({{"id", c.id},
                          {"kind", c.kind},
                          {"params",
                           {{"op", format_label(c.op)},
                            {"latency", c.latency},
                            {"ii", c.ii},
                            {"inputs", c.inputs},
                            {"outputs", c.outputs},
                            {"vertex", c.vertex},
                            {"resources", resources_json(c.resources)}}}});
  j["nets"] = json::array();
  for (const auto &net : n.nets) {
    json sinks = json::array();
    for (const auto &s : net.sinks) sinks.push_back(pin_json(n, s, false));
    j["nets"].push_back({{"driver", pin_json(n, net.driver, true)}, {"sinks", sinks}, {"width", net.width}});
  }
  j["source"] = dfg_to_json(n.source);
  return j;
}

inline Netlist netlist_from_json(const json &j) {
  try {
    Netlist n;
    n.name = j.at("name").get<std::string>();
    n.latency = j.at("latency").get<std::uint32_t>();
    n.resources = resources_from_json(j.at("resources"));
    std::map<std::string, std::uint32_t> in_idx, out_idx;
    for (const auto &p : j.at("ports")) {
      Port port{p.at("name").get<std::string>(), p.at("width").get<std::uint32_t>(), p.at("tag").get<std::string>()};
      const auto dir = p.at("direction").get<std::string>();
      if (dir == "in") {
        in_idx[port.name] = static_cast<std::uint32_t>(n.inputs.size());
        n.inputs.push_back(port);
      } else if (dir == "out") {
        out_idx[port.name] = static_cast<std::uint32_t>(n.outputs.size());
        n.outputs.push_back(port);
      } else {
        fail(ErrorKind::Syntax, "port direction must be 'in' or 'out'");
      }
    }
    for (const auto &c : j.at("cells")) {
      Cell cell;
      cell.id = c.at("id").get<std::size_t>();
      cell.kind = c.at("kind").get<std::string>();
      const auto &p = c.at("params");
      auto l = parse_label(p.at("op").get<std::string>());
      if (!l) fail(ErrorKind::Syntax, "bad cell op '", p.at("op").get<std::string>(), "'");
      cell.op = *l;
      cell.latency = p.at("latency").get<std::uint32_t>();
      cell.ii = p.at("ii").get<std::uint32_t>();
      cell.inputs = p.at("inputs").get<std::uint32_t>();
      cell.outputs = p.at("outputs").get<std::uint32_t>();
      cell.vertex = p.at("vertex").get<std::int64_t>();
      cell.resources = resources_from_json(p.at("resources"));
      if (cell.id != n.cells.size()) fail(ErrorKind::Syntax, "cell ids must be dense and ordered");
      n.cells.push_back(cell);
    }
    auto pin = [&](const json &p, bool driver) -> Pin {
      if (p.contains("port")) {
        const auto name = p.at("port").get<std::string>();
        const auto &idx = driver ? in_idx : out_idx;
        auto it = idx.find(name);
        if (it == idx.end()) fail(ErrorKind::Syntax, "unknown ", driver ? "input" : "output", " port '", name, "'");
        return {kTopPort, it->second};
      }
      const auto cell = p.at("cell").get<std::int64_t>();
      if (cell < 0 || cell >= static_cast<std::int64_t>(n.cells.size())) fail(ErrorKind::Syntax, "unknown cell ", cell);
      return {cell, p.at("pin").get<std::uint32_t>()};
    };
    for (const auto &net : j.at("nets")) {
      Net x;
      x.driver = pin(net.at("driver"), true);
      for (const auto &s : net.at("sinks")) x.sinks.push_back(pin(s, false));
      x.width = net.at("width").get<std::uint32_t>();
      n.nets.push_back(std::move(x));
    }
    n.source = dfg_from_json(j.at("source"));
    return n;
  } catch (const json::exception &e) {
    fail(ErrorKind::Syntax, "malformed netlist: ", e.what());
  }
}

inline std::string save_netlist(const Netlist &n) { return to_json(n).dump(2) + "\n"; }

inline Netlist parse_netlist(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Syntax, "malformed netlist: ", e.what());
  }
  return netlist_from_json(j);
}

} // namespace overlayforge::stitch
