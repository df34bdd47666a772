#include "jmls/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "jmls/em_estimator.hpp"
#include "jmls/serialization.hpp"

namespace jmls::cli {
namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return os;
}

// Plain numeric CSV with a header line and one column per input channel.
Matrix read_input_csv(const fs::path& path, Index nu) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open input file " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0) throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (static_cast<Index>(row.size()) != nu) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(nu) +
                                        " columns");
    }
    rows.push_back(std::move(row));
  }
  Matrix u(static_cast<Index>(rows.size()), nu);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Index c = 0; c < nu; ++c) u(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  return u;
}

struct SimulateArgs {
  std::string model, out, input = "normal", input_csv;
  Index N = 0;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const JmlsModel model = load_model(a.model);
  InputSpec spec;
  if (a.input == "zero") {
    spec.law = InputLaw::zero;
  } else if (a.input == "csv") {
    if (a.input_csv.empty()) throw Error(ErrorCode::Parse, "--input csv needs --input-csv");
    spec.law = InputLaw::given;
    spec.u = read_input_csv(a.input_csv, model.nu);
    if (spec.u.rows() != a.N) throw Error(ErrorCode::DimensionMismatch, "input file has " + std::to_string(spec.u.rows()) + " rows, N = " + std::to_string(a.N));
  }
  const Dataset d = simulate(model, spec, a.N, a.seed);
  if (a.out.empty() || a.out == "-") {
    write_dataset_csv(out, d);
  } else {
    save_dataset(a.out, d);
  }
  return kOk;
}

struct IdentifyArgs {
  std::string data, init, out_dir, smoothed_csv, convention;
  bool random_init = false;
  std::size_t modes = 2;
  Index nx = 1;
  std::uint64_t seed = 1;
  std::size_t filter_budget = 3, bif_budget = 3, smoother_budget = 3;
  int max_iter = 100, patience = 1, T_patience = 10;
  double eps = 1e-6, delta_T = 0.03, eps_T = 0.0;
  bool no_stage_T = false;
  std::vector<std::string> freeze;
  unsigned threads = 1;
};

int cmd_identify(const IdentifyArgs& a, std::ostream& out) {
  const Dataset data = load_dataset(a.data);
  JmlsModel model0;
  if (!a.init.empty()) {
    model0 = load_model(a.init);
    if (!a.convention.empty()) model0.convention = convention_from_string(a.convention);
  } else if (a.random_init) {
    const Convention conv = a.convention.empty() ? Convention::dynamic : convention_from_string(a.convention);
    model0 = random_model(a.nx, data.nu(), data.ny(), a.modes, a.seed, conv);
  } else {
    throw Error(ErrorCode::Parse, "identify needs --init or --random-init");
  }

  EmConfig cfg;
  cfg.estep.filter_budget = a.filter_budget;
  cfg.estep.bif_budget = a.bif_budget;
  cfg.estep.smoother_budget = a.smoother_budget;
  cfg.estep.threads = a.threads;
  cfg.max_iter = a.max_iter;
  cfg.eps = a.eps;
  cfg.patience = a.patience;
  cfg.stage_T = !a.no_stage_T;
  cfg.delta_T = a.delta_T;
  cfg.T_patience = a.T_patience;
  cfg.mstep.eps_T = a.eps_T;
  for (const auto& f : a.freeze) {
    if (f == "gamma") cfg.mstep.freeze.gamma = true;
    else if (f == "pi") cfg.mstep.freeze.pi = true;
    else if (f == "T") cfg.mstep.freeze.T = true;
    else if (f == "prior") cfg.mstep.freeze.prior = true;
    else throw Error(ErrorCode::Parse, "unknown --freeze entry '" + f + "' (gamma, pi, T, prior)");
  }

  const fs::path dir(a.out_dir);
  std::ofstream trace = open_out(dir / "trace.csv");
  trace << "iter,loglik,dloglik,T_enabled,wall_ms\n";
  double prev = NAN;
  cfg.on_iterate = [&](const EmIterate& it) {
    trace << it.iteration << ',' << format_double(it.loglik) << ','
          << (std::isnan(prev) ? std::string("nan") : format_double(it.loglik - prev)) << ','
          << (it.T_enabled ? 1 : 0) << ',' << format_double(it.wall_ms) << '\n';
    trace.flush();
    prev = it.loglik;
  };

  const EmResult r = run_em(model0, data, cfg);
  save_model(dir / "model.json", r.model);

  // One more E-step under the final model for the responsibilities and the smoothed export.
  const EStepResult e = e_step(r.model, data, cfg.estep);
  std::ofstream report = open_out(dir / "report.txt");
  report << "initial_loglik " << format_double(r.trace.front().loglik) << '\n'
         << "final_loglik " << format_double(r.final_loglik) << '\n'
         << "iterations " << r.trace.size() - 1 << '\n'
         << "converged " << (r.converged ? "true" : "false") << '\n';
  for (std::size_t z = 0; z < e.stats.c_m.size(); ++z) report << "c_m " << z + 1 << ' ' << format_double(e.stats.c_m[z]) << '\n';
  for (const auto& w : r.warnings) report << "warning " << w << '\n';

  if (!a.smoothed_csv.empty()) {
    std::ofstream sm = open_out(a.smoothed_csv);
    const std::size_t m = r.model.m();
    sm << 'k';
    for (std::size_t z = 0; z < m; ++z) sm << ",p" << z + 1;
    for (Index i = 0; i < r.model.nx; ++i) sm << ",x" << i + 1;
    sm << '\n';
    for (std::size_t k = 0; k < e.joint.size(); ++k) {
      const HybridMixture mix = marginal_first(e.joint[k]);
      Vector mean = Vector::Zero(r.model.nx);
      sm << k + 1;
      for (std::size_t z = 0; z < m; ++z) {
        sm << ',' << format_double(std::exp(mix.log_mode_weight(z)));
        for (const auto& c : mix.mode(z)) mean += std::exp(c.log_w) * c.mu;
      }
      for (Index i = 0; i < mean.size(); ++i) sm << ',' << format_double(mean(i));
      sm << '\n';
    }
  }

  out << "initial loglik " << format_double(r.trace.front().loglik) << "\nfinal loglik " << format_double(r.final_loglik)
      << "\niterations " << r.trace.size() - 1 << (r.converged ? " (converged)" : "") << '\n';
  return kOk;
}

struct LoglikArgs {
  std::string model, data, steps_csv;
  std::size_t budget = 3;
};

int cmd_loglik(const LoglikArgs& a, std::ostream& out) {
  const JmlsModel model = load_model(a.model);
  const Dataset data = load_dataset(a.data);
  const FilterOutput f = run_filter(model, data, FilterOptions{a.budget, {}});
  out << format_double(f.log_likelihood) << '\n';
  if (!a.steps_csv.empty()) {
    std::ofstream os = open_out(a.steps_csv);
    os << "k,step_loglik,components\n";
    for (std::size_t k = 0; k < f.step_loglik.size(); ++k)
      os << k + 1 << ',' << format_double(f.step_loglik[k]) << ',' << f.component_counts[k] << '\n';
  }
  return kOk;
}

struct BodeArgs {
  std::string model_a, model_b, out_csv;
  std::size_t points = 200;
  double lo = 1e-3, hi = 3.141592653589793;
};

int cmd_bode(const BodeArgs& a, std::ostream& out) {
  const JmlsModel est = load_model(a.model_a);
  const JmlsModel truth = load_model(a.model_b);
  const auto freqs = log_frequency_grid(a.points, a.lo, a.hi);
  const ModeMatch match = match_modes(est, truth, freqs);
  out << "permutation";
  for (auto p : match.permutation) out << ' ' << p + 1;
  out << "\ntotal_error " << format_double(match.total_error) << '\n';
  for (std::size_t z = 0; z < match.per_mode_error.size(); ++z)
    out << "mode " << z + 1 << " -> " << match.permutation[z] + 1 << " error " << format_double(match.per_mode_error[z]) << '\n';
  if (!a.out_csv.empty()) {
    std::ofstream os = open_out(a.out_csv);
    os << "freq,mode_b,mode_a,output,input,mag_a,mag_b\n";
    for (std::size_t z = 0; z < truth.m(); ++z) {
      const std::size_t za = match.permutation[z];
      const auto ha = frequency_response(est.modes[za], freqs);
      const auto hb = frequency_response(truth.modes[z], freqs);
      for (std::size_t f = 0; f < freqs.size(); ++f)
        for (Index o = 0; o < hb[f].rows(); ++o)
          for (Index i = 0; i < hb[f].cols(); ++i)
            os << format_double(freqs[f]) << ',' << z + 1 << ',' << za + 1 << ',' << o + 1 << ',' << i + 1 << ','
               << format_double(std::abs(ha[f](o, i))) << ',' << format_double(std::abs(hb[f](o, i))) << '\n';
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maximum-likelihood identification of jump Markov linear systems", "jmls"};
  app.set_config("--config", "", "INI file; [simulate], [identify], [loglik] and [bode] sections set subcommand options");
  app.require_subcommand(1);
  const auto positive_size = CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max());

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Draw a dataset from a model file");
  s->add_option("--model", sim.model, "Model JSON")->required()->check(CLI::ExistingFile);
  s->add_option("-N,--N", sim.N, "Number of time steps")->required()->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "Random seed");
  s->add_option("--input", sim.input, "Input law")->check(CLI::IsMember({"normal", "zero", "csv"}));
  s->add_option("--input-csv", sim.input_csv, "Input sequence for --input csv");
  s->add_option("-o,--out", sim.out, "Dataset CSV (default: stdout)");

  IdentifyArgs id;
  auto* i = app.add_subcommand("identify", "Run EM identification");
  i->add_option("--data", id.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  i->add_option("--init", id.init, "Initial model JSON")->check(CLI::ExistingFile);
  i->add_flag("--random-init", id.random_init, "Start from random_model(--nx, --modes, --seed)");
  i->add_option("--modes", id.modes, "Mode count for --random-init")->check(positive_size);
  i->add_option("--nx", id.nx, "State dimension for --random-init")->check(CLI::PositiveNumber);
  i->add_option("--seed", id.seed, "Seed for --random-init");
  i->add_option("--convention", id.convention, "dynamic or classic")->check(CLI::IsMember({"dynamic", "classic"}));
  i->add_option("--out-dir", id.out_dir, "Directory for model.json, trace.csv and report.txt")->required();
  i->add_option("--smoothed-csv", id.smoothed_csv, "Smoothed mode probabilities and state means");
  i->add_option("--filter-budget", id.filter_budget, "Components per mode in the forward filter")->check(positive_size);
  i->add_option("--bif-budget", id.bif_budget, "Components per mode in the backward filter")->check(positive_size);
  i->add_option("--smoother-budget", id.smoother_budget, "Components per mode pair in the smoother")->check(positive_size);
  i->add_option("--max-iter", id.max_iter, "Maximum EM iterations")->check(CLI::NonNegativeNumber);
  i->add_option("--eps", id.eps, "Stopping threshold on the loglik improvement")->check(CLI::PositiveNumber);
  i->add_option("--patience", id.patience, "Consecutive small improvements before stopping")->check(CLI::PositiveNumber);
  i->add_option("--delta-T", id.delta_T, "Improvement below which T estimation starts");
  i->add_option("--T-patience", id.T_patience, "Consecutive iterations below --delta-T")->check(CLI::PositiveNumber);
  i->add_flag("--no-stage-T", id.no_stage_T, "Estimate T from the first iteration");
  i->add_option("--eps-T", id.eps_T, "Floor on T entries")->check(CLI::Range(0.0, 1.0));
  i->add_option("--freeze", id.freeze, "Parameters to hold fixed: gamma, pi, T, prior")->delimiter(',');
  i->add_option("--threads", id.threads, "Worker threads")->check(CLI::PositiveNumber);

  LoglikArgs ll;
  auto* l = app.add_subcommand("loglik", "Approximate log-likelihood of a dataset");
  l->add_option("--model", ll.model, "Model JSON")->required()->check(CLI::ExistingFile);
  l->add_option("--data", ll.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  l->add_option("--budget", ll.budget, "Components per mode")->check(positive_size);
  l->add_option("--steps-csv", ll.steps_csv, "Per-step breakdown");

  BodeArgs bd;
  auto* b = app.add_subcommand("bode", "Match modes by magnitude response and report the error");
  b->add_option("--model-a", bd.model_a, "Estimated model")->required()->check(CLI::ExistingFile);
  b->add_option("--model-b", bd.model_b, "Reference model")->required()->check(CLI::ExistingFile);
  b->add_option("--points", bd.points, "Frequency grid size")->check(positive_size);
  b->add_option("--lo", bd.lo, "Lowest frequency (rad/sample)")->check(CLI::PositiveNumber);
  b->add_option("--hi", bd.hi, "Highest frequency (rad/sample)")->check(CLI::PositiveNumber);
  b->add_option("--out", bd.out_csv, "Magnitude data CSV");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (i->parsed()) return cmd_identify(id, out);
    if (l->parsed()) return cmd_loglik(ll, out);
    return cmd_bode(bd, out);
  } catch (const Error& e) {
    err << "jmls: " << e.what() << '\n';
    return is_numerical(e.code()) ? kNumericalError : kConfigError;
  } catch (const std::exception& e) {
    err << "jmls: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace jmls::cli
