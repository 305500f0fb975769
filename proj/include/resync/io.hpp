#pragma once

// Text formats: instance files, rotation-stack files, and iteration traces.
//
// Instance file:
//   n d sigma
//   p q seed                  (p, q may be `nan` when unknown)
//   i j label e00 e01 ...     one line per edge, 0-based, i < j, row-major,
//                             label T (true), O (outlier) or U (unknown)
//   GROUND_TRUTH              optional section
//   e00 e01 ...               n lines, one d x d block each, row-major
//
// Floating-point values are written with 17 significant digits so that every
// double round-trips exactly.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "resync/errors.hpp"
#include "resync/model.hpp"
#include "resync/rotgroup.hpp"
#include "resync/solver.hpp"

namespace resync {

inline constexpr double kLoadRotationTol = 1e-8;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    if (end > pos) out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

inline double parse_double(std::string_view tok, int line) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError(ParseError::Kind::kSyntax, line, "expected a number, got '" + std::string(tok) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view tok, int line) {
  Int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError(ParseError::Kind::kSyntax, line, "expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

template <int D>
void write_block(std::ostream& os, const Block<D>& b) {
  for (Eigen::Index r = 0; r < b.rows(); ++r) {
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      if (r + c > 0) os << ' ';
      os << format_double(b(r, c));
    }
  }
}

template <int D>
Block<D> read_block(const std::vector<std::string_view>& toks, std::size_t offset, int d, int line) {
  if (toks.size() != offset + static_cast<std::size_t>(d) * d) {
    throw ParseError(ParseError::Kind::kSyntax, line, "expected " + std::to_string(d * d) + " block entries");
  }
  Block<D> b(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) b(r, c) = parse_double(toks[offset + r * d + c], line);
  }
  return b;
}

inline char label_char(EdgeLabel l) {
  switch (l) {
    case EdgeLabel::kTrue: return 'T';
    case EdgeLabel::kOutlier: return 'O';
    default: return 'U';
  }
}

inline EdgeLabel parse_label(std::string_view tok, int line) {
  if (tok == "T") return EdgeLabel::kTrue;
  if (tok == "O") return EdgeLabel::kOutlier;
  if (tok == "U") return EdgeLabel::kUnknown;
  throw ParseError(ParseError::Kind::kSyntax, line, "edge label must be T, O or U");
}

// Reads the next non-empty line; returns false at end of input.
inline bool next_line(std::istream& is, std::string& line, int& lineno) {
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

}  // namespace detail

template <int D>
void write_instance(std::ostream& os, const Instance<D>& inst) {
  const auto& g = inst.graph;
  os << g.num_nodes() << ' ' << g.dim() << ' ' << format_double(inst.params.sigma) << '\n';
  os << format_double(inst.params.p) << ' ' << format_double(inst.params.q) << ' ' << inst.params.seed << '\n';
  for (const auto& e : g.edges()) {
    os << e.i << ' ' << e.j << ' ' << detail::label_char(e.label) << ' ';
    detail::write_block<D>(os, e.measurement);
    os << '\n';
  }
  if (inst.ground_truth) {
    os << "GROUND_TRUTH\n";
    for (const auto& b : *inst.ground_truth) {
      detail::write_block<D>(os, b);
      os << '\n';
    }
  }
}

/// Dimension recorded in an instance file header.
inline int peek_dimension(std::istream& is) {
  std::string line;
  int lineno = 0;
  if (!detail::next_line(is, line, lineno)) throw ParseError(ParseError::Kind::kSyntax, 1, "empty instance file");
  const auto toks = detail::split_ws(line);
  if (toks.size() != 3) throw ParseError(ParseError::Kind::kSyntax, lineno, "header must be 'n d sigma'");
  return detail::parse_int<int>(toks[1], lineno);
}

template <int D>
Instance<D> read_instance(std::istream& is) {
  std::string line;
  int lineno = 0;
  if (!detail::next_line(is, line, lineno)) throw ParseError(ParseError::Kind::kSyntax, 1, "empty instance file");
  auto toks = detail::split_ws(line);
  if (toks.size() != 3) throw ParseError(ParseError::Kind::kSyntax, lineno, "header must be 'n d sigma'");
  RcmParams params;
  params.n = detail::parse_int<int>(toks[0], lineno);
  params.d = detail::parse_int<int>(toks[1], lineno);
  params.sigma = detail::parse_double(toks[2], lineno);
  if (params.n < 1 || params.d < 2) throw ParseError(ParseError::Kind::kSyntax, lineno, "need n >= 1 and d >= 2");
  if (D != Eigen::Dynamic && params.d != D) {
    throw ParseError(ParseError::Kind::kSyntax, lineno, "file dimension " + std::to_string(params.d) + " does not match " + std::to_string(D));
  }
  if (!detail::next_line(is, line, lineno)) throw ParseError(ParseError::Kind::kSyntax, lineno + 1, "missing 'p q seed' line");
  toks = detail::split_ws(line);
  if (toks.size() != 3) throw ParseError(ParseError::Kind::kSyntax, lineno, "metadata must be 'p q seed'");
  params.p = detail::parse_double(toks[0], lineno);
  params.q = detail::parse_double(toks[1], lineno);
  params.seed = detail::parse_int<std::uint64_t>(toks[2], lineno);

  const int n = params.n;
  const int d = params.d;
  Instance<D> inst{ObservationGraph<D>(n, d), std::nullopt, params};
  bool in_truth = false;
  RotationStack<D> truth(n, d);
  int truth_rows = 0;
  while (detail::next_line(is, line, lineno)) {
    toks = detail::split_ws(line);
    if (!in_truth && toks.size() == 1 && toks[0] == "GROUND_TRUTH") {
      in_truth = true;
      continue;
    }
    if (in_truth) {
      if (truth_rows >= n) throw ParseError(ParseError::Kind::kSyntax, lineno, "too many ground-truth blocks");
      Block<D> b = detail::read_block<D>(toks, 0, d, lineno);
      if (!is_rotation(b, kLoadRotationTol)) throw ParseError(ParseError::Kind::kInvalidRotation, lineno, "ground-truth block is not in SO(d)");
      truth[truth_rows++] = b;
      continue;
    }
    if (toks.size() < 3) throw ParseError(ParseError::Kind::kSyntax, lineno, "edge line must be 'i j label entries...'");
    const int i = detail::parse_int<int>(toks[0], lineno);
    const int j = detail::parse_int<int>(toks[1], lineno);
    const EdgeLabel label = detail::parse_label(toks[2], lineno);
    Block<D> y = detail::read_block<D>(toks, 3, d, lineno);
    if (!is_rotation(y, kLoadRotationTol)) throw ParseError(ParseError::Kind::kInvalidRotation, lineno, "measurement block is not in SO(d)");
    try {
      inst.graph.add_edge(i, j, y, label);
    } catch (const InvalidParams& e) {
      throw ParseError(ParseError::Kind::kInvalidGraph, lineno, e.what());
    }
  }
  if (in_truth) {
    if (truth_rows != n) throw ParseError(ParseError::Kind::kSyntax, lineno, "expected " + std::to_string(n) + " ground-truth blocks");
    inst.ground_truth = std::move(truth);
  }
  return inst;
}

template <int D>
void save_instance(const Instance<D>& inst, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_instance(os, inst);
  if (!os) throw IoError("write to '" + path + "' failed");
}

template <int D>
Instance<D> load_instance(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_instance<D>(is);
}

inline int peek_dimension(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  return peek_dimension(is);
}

/// Rotation stack file: `n d` then one row-major block per line.
template <int D>
void write_stack(std::ostream& os, const RotationStack<D>& s) {
  os << s.size() << ' ' << s.dim() << '\n';
  for (const auto& b : s) {
    detail::write_block<D>(os, b);
    os << '\n';
  }
}

template <int D>
RotationStack<D> read_stack(std::istream& is) {
  std::string line;
  int lineno = 0;
  if (!detail::next_line(is, line, lineno)) throw ParseError(ParseError::Kind::kSyntax, 1, "empty stack file");
  auto toks = detail::split_ws(line);
  if (toks.size() != 2) throw ParseError(ParseError::Kind::kSyntax, lineno, "header must be 'n d'");
  const int n = detail::parse_int<int>(toks[0], lineno);
  const int d = detail::parse_int<int>(toks[1], lineno);
  if (n < 1 || d < 1 || (D != Eigen::Dynamic && d != D)) throw ParseError(ParseError::Kind::kSyntax, lineno, "bad stack shape");
  RotationStack<D> s(n, d);
  for (int i = 0; i < n; ++i) {
    if (!detail::next_line(is, line, lineno)) throw ParseError(ParseError::Kind::kSyntax, lineno + 1, "missing block");
    s[i] = detail::read_block<D>(detail::split_ws(line), 0, d, lineno);
    if (!is_rotation(s[i], kLoadRotationTol)) throw ParseError(ParseError::Kind::kInvalidRotation, lineno, "block is not in SO(d)");
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kTraceHeader = "iter,mu,objective,dist,dist1,dist_inf,g_part,h_part";
inline constexpr std::string_view kAggregateHeader =
    "param_name,param_value,sigma,mean_final_dist,std_final_dist,mean_iters,seeds";

namespace detail {

inline std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      std::string_view last = line.substr(start);
      if (!last.empty() && last.back() == '\r') last.remove_suffix(1);
      out.push_back(last);
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::optional<double> parse_opt(std::string_view tok, int line) {
  if (tok.empty()) return std::nullopt;
  return parse_double(tok, line);
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    os << r.iter << ',' << format_double(r.mu) << ',' << format_double(r.objective) << ',' << detail::opt_field(r.dist)
       << ',' << detail::opt_field(r.dist1) << ',' << detail::opt_field(r.dist_inf) << ','
       << detail::opt_field(r.g_part) << ',' << detail::opt_field(r.h_part) << '\n';
  }
}

inline IterationTrace read_trace_csv(std::istream& is) {
  std::string line;
  int lineno = 0;
  if (!std::getline(is, line)) throw ParseError(ParseError::Kind::kSyntax, 1, "empty trace file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError(ParseError::Kind::kSyntax, lineno, "unexpected trace header");
  IterationTrace trace;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw ParseError(ParseError::Kind::kSyntax, lineno, "trace row must have 8 fields");
    IterationRecord r;
    r.iter = detail::parse_int<int>(f[0], lineno);
    r.mu = detail::parse_double(f[1], lineno);
    r.objective = detail::parse_double(f[2], lineno);
    r.dist = detail::parse_opt(f[3], lineno);
    r.dist1 = detail::parse_opt(f[4], lineno);
    r.dist_inf = detail::parse_opt(f[5], lineno);
    r.g_part = detail::parse_opt(f[6], lineno);
    r.h_part = detail::parse_opt(f[7], lineno);
    trace.records.push_back(r);
  }
  return trace;
}

struct AggregateRow {
  std::string param_name;
  double param_value = 0.0;
  double sigma = 0.0;
  double mean_final_dist = 0.0;
  double std_final_dist = 0.0;
  double mean_iters = 0.0;
  int seeds = 0;  // seeds that completed; fewer than requested marks a partial failure
};

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    os << r.param_name << ',' << format_double(r.param_value) << ',' << format_double(r.sigma) << ','
       << format_double(r.mean_final_dist) << ',' << format_double(r.std_final_dist) << ','
       << format_double(r.mean_iters) << ',' << r.seeds << '\n';
  }
}

inline std::vector<AggregateRow> read_aggregate_csv(std::istream& is) {
  std::string line;
  int lineno = 0;
  if (!std::getline(is, line)) throw ParseError(ParseError::Kind::kSyntax, 1, "empty aggregate file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kAggregateHeader) throw ParseError(ParseError::Kind::kSyntax, lineno, "unexpected aggregate header");
  std::vector<AggregateRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw ParseError(ParseError::Kind::kSyntax, lineno, "aggregate row must have 7 fields");
    AggregateRow r;
    r.param_name = std::string(f[0]);
    r.param_value = detail::parse_double(f[1], lineno);
    r.sigma = detail::parse_double(f[2], lineno);
    r.mean_final_dist = detail::parse_double(f[3], lineno);
    r.std_final_dist = detail::parse_double(f[4], lineno);
    r.mean_iters = detail::parse_double(f[5], lineno);
    r.seeds = detail::parse_int<int>(f[6], lineno);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace resync
