#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "resync/dimension.hpp"
#include "resync/resync.hpp"

namespace resync::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  int n = 200;
  int d = 3;
  double p = 0.5;
  double q = 0.5;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  int repeats = 20;
  double mu0 = std::numeric_limits<double>::quiet_NaN();
  double gamma = 0.95;
  int max_iters = 500;
  double step_floor = 1e-16;
  std::string init = "spectral";
  std::vector<std::string> in;
  std::string out;
  std::string pq_rule = "none";

  // sweep
  std::string vary = "both";
  std::vector<double> values;
  std::vector<double> sigmas{0.0, 1.0};
  // plotdata
  std::string column = "dist";
  // verify
  std::string suite = "all";
  std::string mutant = "none";

  bool p_given = false;
  bool q_given = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void add_model_flags(CLI::App* app, Options& o) {
  app->add_option("--n", o.n, "number of rotations")->check(CLI::PositiveNumber);
  app->add_option("--d", o.d, "rotation dimension")->check(CLI::Range(2, 64));
  app->add_option("--p", o.p, "true-observation ratio");
  app->add_option("--q", o.q, "observation ratio");
  app->add_option("--sigma", o.sigma, "additive noise level on true measurements");
  app->add_option("--seed", o.seed, "base RNG seed");
  app->add_option("--pq-rule", o.pq_rule, "none, or log-cube for p = q = (log n / n)^(1/3)")
      ->check(CLI::IsMember({"none", "log-cube"}));
}

void add_solver_flags(CLI::App* app, Options& o) {
  app->add_option("--mu0", o.mu0, "initial step size (default 1/(npq), or n/(2|E|) without p, q)");
  app->add_option("--gamma", o.gamma, "step decay factor in (0, 1)");
  app->add_option("--max-iters", o.max_iters, "iteration cap")->check(CLI::NonNegativeNumber);
  app->add_option("--step-floor", o.step_floor, "stop once the step drops below this");
  app->add_option("--init", o.init, "initial point")
      ->check(CLI::IsMember({"spectral", "naive-spectral", "random", "ground-truth"}));
}

RcmParams model_params(const Options& o, std::uint64_t seed) {
  RcmParams prm;
  prm.n = o.n;
  prm.d = o.d;
  prm.p = o.p;
  prm.q = o.q;
  if (o.pq_rule == "log-cube") prm.p = prm.q = log_cube_ratio(o.n);
  prm.sigma = o.sigma;
  prm.seed = seed;
  return prm;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  return is;
}

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return r;
}

template <int D>
RotationStack<D> make_init(const Instance<D>& inst, const std::string& kind, std::uint64_t seed) {
  if (kind == "spectral") return spectrin(inst.graph).stack;
  if (kind == "naive-spectral") return naive_spectrin(inst.graph).stack;
  if (kind == "ground-truth") {
    if (!inst.ground_truth) throw UsageError("--init ground-truth needs an instance with ground truth");
    return *inst.ground_truth;
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return random_rotation_stack<D>(rng, inst.graph.num_nodes(), inst.graph.dim());
}

template <int D>
SolverConfig solver_config(const Options& o, const Instance<D>& inst) {
  SolverConfig cfg;
  cfg.mu0 = std::isnan(o.mu0) ? default_initial_step(inst.graph, inst.params) : o.mu0;
  cfg.gamma = o.gamma;
  cfg.max_iters = o.max_iters;
  cfg.step_floor = o.step_floor;
  return cfg;
}

const std::string& single_input(const Options& o) {
  if (o.in.size() != 1) throw UsageError("expected exactly one --in file");
  return o.in.front();
}

// ---------------------------------------------------------------------------

int cmd_generate(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("generate needs --out");
  return with_dimension(o.d, [&]<int D>() {
    const auto inst = generate_instance<D>(model_params(o, o.seed));
    save_instance(inst, o.out);
    out << "wrote " << o.out << ": n " << inst.graph.num_nodes() << ", edges " << inst.graph.num_edges()
        << ", outliers " << inst.graph.count(EdgeLabel::kOutlier) << ", p " << format_double(inst.params.p) << ", q "
        << format_double(inst.params.q) << '\n';
    return kOk;
  });
}

int cmd_run(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("run needs --out <directory>");
  if (o.repeats < 1) throw UsageError("--repeats must be at least 1");
  const int d = o.in.empty() ? o.d : peek_dimension(single_input(o));
  ensure_dir(o.out);
  return with_dimension(d, [&]<int D>() {
    std::vector<double> finals;
    std::vector<double> iters;
    double sigma = o.sigma;
    for (int r = 0; r < o.repeats; ++r) {
      const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(r);
      const Instance<D> inst = o.in.empty() ? generate_instance<D>(model_params(o, seed)) : load_instance<D>(o.in.front());
      sigma = inst.params.sigma;
      const auto init = make_init(inst, o.init, seed);
      const auto cfg = solver_config(o, inst);
      const RotationStack<D>* truth = inst.ground_truth ? &*inst.ground_truth : nullptr;
      const auto result = resync_run(inst.graph, cfg, init, truth);

      const fs::path dir(o.out);
      {
        auto os = open_out(dir / ("trace_seed" + std::to_string(seed) + ".csv"));
        write_trace_csv(os, result.trace);
      }
      {
        auto os = open_out(dir / ("final_seed" + std::to_string(seed) + ".txt"));
        write_stack(os, result.solution);
      }
      const auto& first = result.trace.records.front();
      const auto& last = result.trace.back();
      out << "seed " << seed << ": iterations " << result.iterations << ", objective " << format_double(last.objective);
      if (last.dist) {
        out << ", dist " << format_double(*first.dist) << " -> " << format_double(*last.dist);
        finals.push_back(*last.dist);
      }
      out << '\n';
      iters.push_back(result.iterations);
    }
    const auto fd = mean_std(finals);
    AggregateRow row{"gamma", o.gamma, sigma, fd.mean, fd.std, mean_std(iters).mean, static_cast<int>(finals.size())};
    auto os = open_out(fs::path(o.out) / "aggregate.csv");
    write_aggregate_csv(os, {row});
    return kOk;
  });
}

int cmd_sweep(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("sweep needs --out <file>");
  if (o.repeats < 1) throw UsageError("--repeats must be at least 1");
  std::vector<std::string> params;
  if (o.vary == "p" || o.vary == "both") params.emplace_back("p");
  if (o.vary == "q" || o.vary == "both") params.emplace_back("q");
  std::vector<double> values = o.values;
  if (values.empty()) {
    for (int k = 2; k <= 10; ++k) values.push_back(k / 10.0);
  }
  const double fixed_p = o.p_given ? o.p : 0.2;
  const double fixed_q = o.q_given ? o.q : 0.2;

  std::vector<AggregateRow> rows;
  with_dimension(o.d, [&]<int D>() {
    for (const auto& name : params) {
      for (double sigma : o.sigmas) {
        for (double value : values) {
          std::vector<double> finals;
          std::vector<double> iters;
          for (int r = 0; r < o.repeats; ++r) {
            RcmParams prm{o.n, o.d, name == "p" ? value : fixed_p, name == "q" ? value : fixed_q, sigma,
                          o.seed + static_cast<std::uint64_t>(r)};
            try {
              const auto inst = generate_instance<D>(prm);
              const auto init = make_init(inst, o.init, prm.seed);
              const auto res = resync_run(inst.graph, solver_config(o, inst), init, &*inst.ground_truth);
              finals.push_back(*res.trace.back().dist);
              iters.push_back(res.iterations);
            } catch (const Error& e) {
              out << "  " << name << "=" << value << " sigma=" << sigma << " seed " << prm.seed << " failed: " << e.what()
                  << '\n';
            }
          }
          const auto fd = mean_std(finals);
          rows.push_back({name, value, sigma, fd.mean, fd.std, mean_std(iters).mean, static_cast<int>(finals.size())});
          out << name << "=" << format_double(value) << " sigma=" << format_double(sigma) << ": mean final dist "
              << format_double(fd.mean) << " over " << finals.size() << " seeds\n";
        }
      }
    }
    return 0;
  });
  auto os = open_out(o.out);
  write_aggregate_csv(os, rows);
  return kOk;
}

int cmd_compare_init(const Options& o, std::ostream& out) {
  if (o.repeats < 1) throw UsageError("--repeats must be at least 1");
  std::ostringstream csv;
  csv << "seed,spectral_dist,naive_dist,flipped\n";
  std::vector<double> spectral;
  std::vector<double> naive;
  int wins = 0;
  with_dimension(o.d, [&]<int D>() {
    for (int r = 0; r < o.repeats; ++r) {
      const auto prm = model_params(o, o.seed + static_cast<std::uint64_t>(r));
      const auto inst = generate_instance<D>(prm);
      const auto eig = leading_eigenpairs(GraphOperator<D>(inst.graph), prm.d);
      const auto sp = spectrin_from_eigenvectors<D>(eig.vectors, prm.n, prm.d);
      const auto nv = naive_from_eigenvectors<D>(eig.vectors, prm.n, prm.d);
      const double ds = dist(sp.stack, *inst.ground_truth);
      const double dn = dist(nv.stack, *inst.ground_truth);
      spectral.push_back(ds);
      naive.push_back(dn);
      if (ds <= dn) ++wins;
      csv << prm.seed << ',' << format_double(ds) << ',' << format_double(dn) << ',' << (sp.flipped ? 1 : 0) << '\n';
    }
    return 0;
  });
  if (!o.out.empty()) {
    auto os = open_out(o.out);
    os << csv.str();
  }
  out << "mean dist spectral " << format_double(mean_std(spectral).mean) << ", naive "
      << format_double(mean_std(naive).mean) << ", spectral <= naive on " << wins << "/" << o.repeats << " seeds\n";
  return kOk;
}

int cmd_verify(const Options& o, std::ostream& out) {
  static const std::vector<std::string> kSuites{"procrustes", "finite-difference", "spectrum", "haar", "weak-sharpness"};
  if (o.suite != "all" && std::find(kSuites.begin(), kSuites.end(), o.suite) == kSuites.end()) {
    throw UsageError("unknown suite '" + o.suite + "'");
  }
  verify::GradientFn<3> gradient;
  if (o.mutant == "tangent-sign") {
    // Deliberately wrong projector (X^T B + B^T X instead of X^T B - B^T X),
    // used to show the finite-difference suite detects it.
    gradient = [](const RotationStack<3>& x, const ObservationGraph<3>& g) {
      const auto e = euclidean_subgradient(x, g);
      GeneralBlockStack<3> outg(x.size(), 3);
      for (int i = 0; i < x.size(); ++i) {
        const Block<3> xtb = x[i].transpose() * e[i];
        outg[i] = 0.5 * x[i] * (xtb + xtb.transpose());
      }
      return outg;
    };
  }
  bool all_ok = true;
  for (const auto& name : kSuites) {
    if (o.suite != "all" && o.suite != name) continue;
    verify::SuiteReport rep;
    if (name == "procrustes") rep = verify::procrustes();
    if (name == "finite-difference") rep = verify::finite_difference<3>({}, gradient);
    if (name == "spectrum") rep = verify::spectrum();
    if (name == "haar") rep = verify::haar();
    if (name == "weak-sharpness") {
      verify::WeakSharpnessOptions ws;
      ws.n = o.n;
      if (o.p_given) ws.p = o.p;
      if (o.q_given) ws.q = o.q;
      ws.seed = o.seed;
      rep = verify::weak_sharpness(ws);
    }
    out << rep.name << ": " << (rep.passed ? "PASS" : "FAIL") << "  " << rep.summary << '\n';
    all_ok = all_ok && rep.passed;
  }
  return all_ok ? kOk : kNumericalFailure;
}

// --- plotdata ---------------------------------------------------------------

std::string first_line(const std::string& path) {
  auto is = open_in(path);
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::optional<double> pick_column(const IterationRecord& r, const std::string& column) {
  if (column == "mu") return r.mu;
  if (column == "objective") return r.objective;
  if (column == "dist") return r.dist;
  if (column == "dist1") return r.dist1;
  if (column == "dist_inf") return r.dist_inf;
  if (column == "g_part") return r.g_part;
  if (column == "h_part") return r.h_part;
  throw UsageError("unknown trace column '" + column + "'");
}

void plot_traces(const Options& o, std::ostream& out) {
  std::vector<std::string> labels;
  std::vector<IterationTrace> traces;
  for (const auto& path : o.in) {
    auto is = open_in(path);
    auto tr = read_trace_csv(is);
    if (tr.empty()) throw ParseError(ParseError::Kind::kSyntax, 2, "trace '" + path + "' has no records");
    std::string label = fs::path(path).stem().string();
    if (tr.size() >= 2 && tr.records[0].mu > 0.0) label = "gamma=" + short_number(tr.records[1].mu / tr.records[0].mu);
    if (std::find(labels.begin(), labels.end(), label) != labels.end()) label += "_" + fs::path(path).stem().string();
    labels.push_back(label);
    traces.push_back(std::move(tr));
  }
  std::size_t rows = 0;
  for (const auto& t : traces) rows = std::max(rows, t.size());

  ensure_dir(o.out);
  const fs::path dir(o.out);
  {
    auto os = open_out(dir / "traces.dat");
    os << "iter";
    for (const auto& l : labels) os << ' ' << l;
    os << '\n';
    for (std::size_t k = 0; k < rows; ++k) {
      os << k;
      for (const auto& t : traces) {
        std::optional<double> v;
        if (k < t.size()) v = pick_column(t.records[k], o.column);
        os << ' ' << (v ? format_double(*v) : std::string("?"));
      }
      os << '\n';
    }
  }
  {
    auto os = open_out(dir / "traces.gp");
    os << "set terminal pngcairo size 900,600\n"
       << "set output 'traces.png'\n"
       << "set datafile missing '?'\n"
       << "set key autotitle columnhead\n"
       << "set logscale y\n"
       << "set format y '10^{%L}'\n"
       << "set xlabel 'iteration'\n"
       << "set ylabel '" << o.column << "'\n"
       << "plot for [c=2:" << traces.size() + 1 << "] 'traces.dat' using 1:c with lines lw 2\n";
  }
  out << "wrote " << traces.size() << " series to " << (dir / "traces.dat").string() << '\n';
}

void plot_aggregate(const Options& o, std::ostream& out) {
  std::vector<AggregateRow> rows;
  for (const auto& path : o.in) {
    auto is = open_in(path);
    auto r = read_aggregate_csv(is);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty()) throw ParseError(ParseError::Kind::kSyntax, 2, "aggregate input has no rows");
  // param -> sigma -> value -> (mean, std)
  std::map<std::string, std::map<double, std::map<double, std::pair<double, double>>>> groups;
  for (const auto& r : rows) groups[r.param_name][r.sigma][r.param_value] = {r.mean_final_dist, r.std_final_dist};

  ensure_dir(o.out);
  const fs::path dir(o.out);
  for (const auto& [param, by_sigma] : groups) {
    std::vector<double> xs;
    for (const auto& [sigma, by_value] : by_sigma) {
      for (const auto& [value, ms] : by_value) xs.push_back(value);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    const std::string stem = "sweep_" + param;
    {
      auto os = open_out(dir / (stem + ".dat"));
      os << param;
      for (const auto& [sigma, by_value] : by_sigma) {
        os << " mean_sigma" << short_number(sigma) << " std_sigma" << short_number(sigma);
      }
      os << '\n';
      for (double x : xs) {
        os << format_double(x);
        for (const auto& [sigma, by_value] : by_sigma) {
          auto it = by_value.find(x);
          if (it == by_value.end() || std::isnan(it->second.first)) {
            os << " ? ?";
          } else {
            os << ' ' << format_double(it->second.first) << ' ' << format_double(it->second.second);
          }
        }
        os << '\n';
      }
    }
    {
      auto os = open_out(dir / (stem + ".gp"));
      os << "set terminal pngcairo size 900,600\n"
         << "set output '" << stem << ".png'\n"
         << "set datafile missing '?'\n"
         << "set key autotitle columnhead\n"
         << "set xlabel '" << param << "'\n"
         << "set ylabel 'final dist'\n"
         << "plot for [s=0:" << by_sigma.size() - 1 << "] '" << stem
         << ".dat' using 1:(column(2+2*s)):(column(3+2*s)) with yerrorlines lw 2 title columnhead(2+2*s)\n";
    }
    out << "wrote " << by_sigma.size() << " series to " << (dir / (stem + ".dat")).string() << '\n';
  }
}

int cmd_plotdata(const Options& o, std::ostream& out) {
  if (o.in.empty()) throw UsageError("plotdata needs at least one --in file");
  if (o.out.empty()) throw UsageError("plotdata needs --out <directory>");
  const std::string header = first_line(o.in.front());
  for (const auto& path : o.in) {
    if (first_line(path) != header) throw ParseError(ParseError::Kind::kSyntax, 1, "'" + path + "' mixes file kinds");
  }
  if (header == kTraceHeader) {
    plot_traces(o, out);
  } else if (header == kAggregateHeader) {
    plot_aggregate(o, out);
  } else {
    throw ParseError(ParseError::Kind::kSyntax, 1, "'" + o.in.front() + "' is neither a trace nor an aggregate CSV");
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust rotation synchronization by Riemannian subgradient descent"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "sample a corrupted instance and write it to --out");
  add_model_flags(gen, o);
  gen->add_option("--out", o.out, "instance file");

  auto* run_cmd = app.add_subcommand("run", "spectral initialization followed by the subgradient iteration");
  add_model_flags(run_cmd, o);
  add_solver_flags(run_cmd, o);
  run_cmd->add_option("--repeats", o.repeats, "number of seeds")->default_val(1);
  run_cmd->add_option("--in", o.in, "instance file (instead of generating)");
  run_cmd->add_option("--out", o.out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "final distance over a grid of p or q values");
  add_model_flags(sweep, o);
  add_solver_flags(sweep, o);
  sweep->add_option("--repeats", o.repeats, "seeds per grid point");
  sweep->add_option("--vary", o.vary, "p, q or both")->check(CLI::IsMember({"p", "q", "both"}));
  sweep->add_option("--values", o.values, "grid values (default 0.2 ... 1.0)")->delimiter(',');
  sweep->add_option("--sigmas", o.sigmas, "noise levels (default 0,1)")->delimiter(',');
  sweep->add_option("--out", o.out, "aggregate CSV");

  auto* cmp = app.add_subcommand("compare-init", "spectral initialization against the naive variant");
  add_model_flags(cmp, o);
  cmp->add_option("--repeats", o.repeats, "number of seeds");
  cmp->add_option("--out", o.out, "per-seed CSV");

  auto* ver = app.add_subcommand("verify", "run the oracle suites");
  ver->add_option("--suite", o.suite, "all, procrustes, finite-difference, spectrum, haar, weak-sharpness");
  ver->add_option("--n", o.n, "weak-sharpness instance size")->check(CLI::PositiveNumber);
  ver->add_option("--p", o.p, "weak-sharpness true-observation ratio");
  ver->add_option("--q", o.q, "weak-sharpness observation ratio");
  ver->add_option("--seed", o.seed, "weak-sharpness base seed");
  ver->add_option("--mutant", o.mutant, "none, or tangent-sign to inject a projection sign error")
      ->check(CLI::IsMember({"none", "tangent-sign"}));

  auto* plot = app.add_subcommand("plotdata", "turn trace or aggregate CSVs into gnuplot data and scripts");
  plot->add_option("--in", o.in, "trace CSVs (one series each) or aggregate CSVs")->expected(1, -1);
  plot->add_option("--out", o.out, "output directory");
  plot->add_option("--column", o.column, "trace column to plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }
  for (auto* sub : {gen, run_cmd, sweep, cmp, ver}) {
    if (sub->count("--p") > 0) o.p_given = true;
    if (sub->count("--q") > 0) o.q_given = true;
  }

  try {
    if (*gen) return cmd_generate(o, out);
    if (*run_cmd) return cmd_run(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*cmp) return cmd_compare_init(o, out);
    if (*ver) return cmd_verify(o, out);
    if (*plot) return cmd_plotdata(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidParams& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kIoError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kUsageError;
}

}  // namespace resync::cli
