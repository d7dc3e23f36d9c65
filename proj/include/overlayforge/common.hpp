#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace overlayforge {

// Every failure the toolchain reports is an Error carrying a kind, so callers
// (and the CLI) can tell diagnostics apart without parsing messages.
enum class ErrorKind {
  Syntax,
  SsaRedefinition,
  Arity,
  UnknownOpcode,
  InvalidModule,
  InvalidGraph,
  DegenerateGraph,
  OracleLimit,
  Library,
  Unsupported,
  WidthMismatch,
  Cyclic,
  Slot,
  Simulation,
  StepLimit,
  Io,
  Internal,
};

inline const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::Syntax: return "syntax error";
  case ErrorKind::SsaRedefinition: return "SSA redefinition";
  case ErrorKind::Arity: return "arity mismatch";
  case ErrorKind::UnknownOpcode: return "unknown opcode";
  case ErrorKind::InvalidModule: return "invalid module";
  case ErrorKind::InvalidGraph: return "invalid graph";
  case ErrorKind::DegenerateGraph: return "degenerate graph";
  case ErrorKind::OracleLimit: return "oracle size cap exceeded";
  case ErrorKind::Library: return "library error";
  case ErrorKind::Unsupported: return "unsupported primitive";
  case ErrorKind::WidthMismatch: return "width mismatch";
  case ErrorKind::Cyclic: return "cyclic graph";
  case ErrorKind::Slot: return "slot error";
  case ErrorKind::Simulation: return "simulation error";
  case ErrorKind::StepLimit: return "step limit exceeded";
  case ErrorKind::Io: return "I/O error";
  case ErrorKind::Internal: return "internal error";
  }
  return "error";
}

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Parse failures additionally carry a source position (1-based).
class ParseError : public Error {
public:
  ParseError(ErrorKind kind, const std::string &what, std::size_t line, std::size_t column)
      : Error(kind, what + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

template <class... Args> [[noreturn]] void fail(ErrorKind kind, Args &&...args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(kind, os.str());
}

// Non-fatal findings (warnings, skipped embeddings, unmerged groups).
enum class Severity { Debug, Info, Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Warning;
  std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

namespace log {

inline Severity threshold() {
  static const Severity level = [] {
    const char *env = std::getenv("OVERLAYFORGE_LOG");
    std::string_view v = env ? env : "warn";
    if (v == "error") return Severity::Error;
    if (v == "info") return Severity::Info;
    if (v == "debug") return Severity::Debug;
    return Severity::Warning;
  }();
  return level;
}

inline void emit(Severity s, std::string_view msg) {
  if (s < threshold()) return;
  static constexpr const char *names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[overlayforge:" << names[static_cast<int>(s)] << "] " << msg << '\n';
}

inline void report(const Diagnostics &diags) {
  for (const auto &d : diags) emit(d.severity, d.message);
}

} // namespace log

struct Resources {
  std::uint64_t lut = 0;
  std::uint64_t ff = 0;
  std::uint64_t dsp = 0;
  std::uint64_t bram = 0;

  Resources &operator+=(const Resources &o) {
    lut += o.lut;
    ff += o.ff;
    dsp += o.dsp;
    bram += o.bram;
    return *this;
  }
  friend Resources operator+(Resources a, const Resources &b) { return a += b; }
  friend Resources operator*(Resources a, std::uint64_t k) {
    a.lut *= k;
    a.ff *= k;
    a.dsp *= k;
    a.bram *= k;
    return a;
  }
  friend bool operator==(const Resources &, const Resources &) = default;
};

inline std::ostream &operator<<(std::ostream &os, const Resources &r) {
  return os << "lut=" << r.lut << " ff=" << r.ff << " dsp=" << r.dsp << " bram=" << r.bram;
}

} // namespace overlayforge
