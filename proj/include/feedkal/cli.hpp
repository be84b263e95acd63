#ifndef FEEDKAL_CLI_HPP
#define FEEDKAL_CLI_HPP

#include "feedkal/filter_ss.hpp"
#include "feedkal/filter_tv.hpp"
#include "feedkal/io.hpp"
#include "feedkal/sim.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace feedkal::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;

enum class Estimator { TvCorrected, SsCorrected, SsLegacy };

inline const std::vector<Estimator>& all_estimators() {
  static const std::vector<Estimator> all{Estimator::TvCorrected, Estimator::SsCorrected,
                                          Estimator::SsLegacy};
  return all;
}

inline std::string name(Estimator e) {
  switch (e) {
    case Estimator::TvCorrected: return "tv_corrected";
    case Estimator::SsCorrected: return "ss_corrected";
    case Estimator::SsLegacy: return "ss_legacy";
  }
  return {};
}

/// Plot legends: time-varying corrected, steady-state corrected, steady-state legacy.
inline std::string legend(Estimator e) {
  switch (e) {
    case Estimator::TvCorrected: return "new";
    case Estimator::SsCorrected: return "new ss";
    case Estimator::SsLegacy: return "prev ss";
  }
  return {};
}

inline OutputMode mode_of(Estimator e) {
  return e == Estimator::SsLegacy ? OutputMode::Legacy : OutputMode::Corrected;
}

inline Estimator parse_estimator(const std::string& s) {
  for (Estimator e : all_estimators()) {
    if (s == name(e)) return e;
  }
  throw InputError("unknown estimator \"" + s + "\" (expected tv_corrected, ss_corrected or ss_legacy)");
}

inline std::vector<Estimator> parse_estimator_list(const std::string& list) {
  std::vector<Estimator> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Estimator e = parse_estimator(item);
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  if (out.empty()) throw InputError("at least one estimator must be selected");
  return out;
}

struct RunConfig {
  std::filesystem::path system_path;
  ScenarioKind scenario = ScenarioKind::Nominal;
  std::optional<Eigen::Index> steps;  ///< default 1e5 nominal, 1e4 random walk
  std::uint64_t seed = 1;
  std::optional<double> dt;
  DiscretizationMethod disc = DiscretizationMethod::Euler;
  std::vector<Estimator> estimators = all_estimators();
  std::filesystem::path out_dir = "out";
  double p0_scale = 1.0;
  double bias_std = 0.01;
  Eigen::Index burn_in = 100;

  Eigen::Index n_steps() const {
    if (steps) return *steps;
    return scenario == ScenarioKind::Nominal ? 100000 : 10000;
  }

  Scenario make_scenario() const {
    Scenario sc;
    sc.kind = scenario;
    sc.n_steps = n_steps();
    sc.seed = seed;
    sc.bias_step_std = bias_std;
    return sc;
  }
};

inline DiscreteSystem load_config_system(const RunConfig& cfg) {
  const SystemFile f = load_system_file(cfg.system_path);
  DiscreteSystem sys = to_discrete(f, cfg.dt, cfg.disc);
  const ValidationReport rep = validate(sys);
  if (!rep.ok()) {
    std::string msg = "invalid system " + cfg.system_path.string() + ":";
    for (const auto& s : rep.issues) msg += "\n  " + s;
    throw InputError(msg);
  }
  return sys;
}

struct EstimatorResult {
  Estimator estimator;
  std::vector<EstimateFrame> frames;
  ErrorStats stats;
};

struct Experiment {
  DiscreteSystem system;
  Trajectory trajectory;
  RiccatiSolution riccati;
  std::vector<EstimatorResult> results;

  const EstimatorResult* find(Estimator e) const {
    for (const auto& r : results) {
      if (r.estimator == e) return &r;
    }
    return nullptr;
  }
};

/// Simulates the scenario once and runs every selected estimator on that
/// single noise realization.
inline Experiment run_experiment(const DiscreteSystem& sys, const RunConfig& cfg) {
  Experiment ex;
  ex.system = sys;
  ex.trajectory = simulate(sys, cfg.make_scenario());
  ex.riccati = solve_riccati(sys);

  std::optional<SteadyFilter> steady;
  for (Estimator e : cfg.estimators) {
    EstimatorResult r{e, {}, {}};
    if (e == Estimator::TvCorrected) {
      r.frames = run(sys, FilterState::initial(sys.nx(), cfg.p0_scale), ex.trajectory.Z,
                     ex.trajectory.U, OutputMode::Corrected);
    } else {
      if (!steady) steady.emplace(sys, ex.riccati.P);
      r.frames = steady->run(Vector::Zero(sys.nx()), ex.trajectory.Z, ex.trajectory.U,
                             mode_of(e));
    }
    r.stats = evaluate(ex.trajectory, r.frames, cfg.burn_in);
    ex.results.push_back(std::move(r));
  }
  return ex;
}

namespace detail {

inline void append_names(std::vector<std::string>& h, const std::string& prefix,
                         Eigen::Index n) {
  for (Eigen::Index i = 1; i <= n; ++i) h.push_back(prefix + std::to_string(i));
}

inline void print_matrix(std::ostream& os, const std::string& label, const Matrix& m) {
  os << label << " =";
  if (m.rows() <= 1) {
    os << " [";
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << format_double(m(0, c));
    os << "]\n";
    return;
  }
  os << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << "  [";
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << format_double(m(r, c));
    os << "]\n";
  }
}

inline nlohmann::json to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

/// Per-step CSV of one estimator: step, time, z, y_true, y_hat, y_err,
/// x_true, x_hat, w_true, w_hat.
inline CsvTable estimator_table(const DiscreteSystem& sys, const Trajectory& t,
                                const std::vector<EstimateFrame>& frames) {
  const auto nx = sys.nx(), ny = sys.ny(), nz = sys.nz(), nw = sys.nw();
  CsvTable tab;
  tab.header = {"step", "time"};
  detail::append_names(tab.header, "z", nz);
  detail::append_names(tab.header, "y_true", ny);
  detail::append_names(tab.header, "y_hat", ny);
  detail::append_names(tab.header, "y_err", ny);
  detail::append_names(tab.header, "x_true", nx);
  detail::append_names(tab.header, "x_hat", nx);
  detail::append_names(tab.header, "w_true", nw);
  detail::append_names(tab.header, "w_hat", nw);

  const auto n = t.X.rows();
  tab.data.resize(n, static_cast<Eigen::Index>(tab.header.size()));
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& f = frames[static_cast<std::size_t>(k)];
    Eigen::Index c = 0;
    tab.data(k, c++) = static_cast<double>(k);
    tab.data(k, c++) = static_cast<double>(k) * sys.dt;
    tab.data.block(k, c, 1, nz) = t.Z.row(k);
    c += nz;
    tab.data.block(k, c, 1, ny) = t.Ytrue.row(k);
    c += ny;
    tab.data.block(k, c, 1, ny) = f.y_post.transpose();
    c += ny;
    tab.data.block(k, c, 1, ny) = t.Ytrue.row(k) - f.y_post.transpose();
    c += ny;
    tab.data.block(k, c, 1, nx) = t.X.row(k);
    c += nx;
    tab.data.block(k, c, 1, nx) = f.x_post.transpose();
    c += nx;
    tab.data.block(k, c, 1, nw) = t.W.row(k);
    c += nw;
    tab.data.block(k, c, 1, nw) = f.w_hat().transpose();
  }
  return tab;
}

inline nlohmann::json summary_json(const Experiment& ex) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& r : ex.results) {
    const double w_rms = r.stats.w_rms.size() == 0
                             ? 0.0
                             : std::sqrt(r.stats.w_rms.squaredNorm() /
                                         static_cast<double>(r.stats.w_rms.size()));
    j[name(r.estimator)] = {{"legend", legend(r.estimator)},
                            {"y_err_var", detail::to_json(r.stats.y_err_var)},
                            {"y_rms", detail::to_json(r.stats.y_rms)},
                            {"x_rms", detail::to_json(r.stats.x_rms)},
                            {"w_rms", w_rms},
                            {"samples", r.stats.samples}};
  }
  return j;
}

/// Python/matplotlib script that redraws, per output and state, truth against
/// each estimator and the estimate errors.
inline std::string plot_script(const Experiment& ex) {
  std::ostringstream py;
  py << "#!/usr/bin/env python3\n"
        "# Generated by feedkal run. Usage: python3 plot_figures.py [--show]\n"
        "import csv, os, sys\n"
        "import matplotlib\n"
        "if '--show' not in sys.argv:\n"
        "    matplotlib.use('Agg')\n"
        "import matplotlib.pyplot as plt\n\n"
        "HERE = os.path.dirname(os.path.abspath(__file__))\n"
        "ESTIMATORS = [";
  for (std::size_t i = 0; i < ex.results.size(); ++i) {
    const auto e = ex.results[i].estimator;
    py << (i ? ", " : "") << "('" << name(e) << "', '" << legend(e) << "')";
  }
  py << "]\n"
        "NY, NX, NW = "
     << ex.system.ny() << ", " << ex.system.nx() << ", " << ex.system.nw()
     << "\n\n"
        "def load(name):\n"
        "    with open(os.path.join(HERE, name + '.csv')) as fh:\n"
        "        rows = list(csv.DictReader(fh))\n"
        "    return {k: [float(r[k]) for r in rows] for k in rows[0]}\n\n"
        "data = {n: load(n) for n, _ in ESTIMATORS}\n"
        "ref = data[ESTIMATORS[0][0]]\n\n"
        "def figure(title, truth_col, hat_col, fname):\n"
        "    fig, (top, bot) = plt.subplots(2, 1, sharex=True, figsize=(9, 6))\n"
        "    top.plot(ref['time'], ref[truth_col], 'k', lw=0.8, label='true')\n"
        "    for n, leg in ESTIMATORS:\n"
        "        d = data[n]\n"
        "        top.plot(d['time'], d[hat_col], lw=0.8, label=leg)\n"
        "        err = [a - b for a, b in zip(d[truth_col], d[hat_col])]\n"
        "        bot.plot(d['time'], err, lw=0.8, label=leg)\n"
        "    top.set_title(title)\n"
        "    top.legend()\n"
        "    bot.set_ylabel('error')\n"
        "    bot.set_xlabel('time [s]')\n"
        "    bot.legend()\n"
        "    fig.tight_layout()\n"
        "    fig.savefig(os.path.join(HERE, fname), dpi=120)\n\n"
        "for i in range(1, NY + 1):\n"
        "    figure(f'Output y({i}) estimation', f'y_true{i}', f'y_hat{i}', f'output_y{i}.png')\n"
        "for i in range(1, NX + 1):\n"
        "    figure(f'State x({i}) estimation', f'x_true{i}', f'x_hat{i}', f'state_x{i}.png')\n"
        "for i in range(1, NW + 1):\n"
        "    figure(f'Unknown input w({i}) estimation', f'w_true{i}', f'w_hat{i}', "
        "f'input_w{i}.png')\n"
        "if '--show' in sys.argv:\n"
        "    plt.show()\n";
  return py.str();
}

/// Error-variance ratio legacy / corrected per output, for each corrected
/// estimator in the experiment.
struct CompareRow {
  Estimator corrected;
  Vector ratio;
};

inline std::vector<CompareRow> variance_ratios(const Experiment& ex) {
  std::vector<CompareRow> rows;
  const auto* legacy = ex.find(Estimator::SsLegacy);
  if (!legacy) return rows;
  for (const auto& r : ex.results) {
    if (r.estimator == Estimator::SsLegacy) continue;
    rows.push_back({r.estimator, legacy->stats.y_err_var.cwiseQuotient(r.stats.y_err_var)});
  }
  return rows;
}

/// Maps library exceptions to the stable exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SingularInnovation& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

inline int cmd_riccati(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const DiscreteSystem sys = load_config_system(cfg);
    const RiccatiSolution sol = solve_riccati(sys);
    const SteadyFilter f(sys, sol.P);
    const double rel = sol.residual / (1.0 + max_abs(sol.P));

    detail::print_matrix(out, "P_star", sol.P);
    detail::print_matrix(out, "Kg", f.gains().Kg);
    detail::print_matrix(out, "Kg2", f.gains().Kg2);
    out << "residual = " << format_double(sol.residual) << '\n';
    out << "relative_residual = " << format_double(rel) << '\n';
    out << "iterations = " << sol.iterations << '\n';
    out << "spectral_radius_Acl = " << format_double(f.closed_loop_spectral_radius()) << '\n';
    if (!f.is_stable()) {
      err << "warning: closed-loop estimator matrix is not Schur stable\n";
    }
    return kExitOk;
  });
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const DiscreteSystem sys = load_config_system(cfg);
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.out_dir)) {
      throw InputError("cannot create output directory " + cfg.out_dir.string());
    }
    const Experiment ex = run_experiment(sys, cfg);

    for (const auto& r : ex.results) {
      const auto path = cfg.out_dir / (name(r.estimator) + ".csv");
      write_file_atomic(path, to_csv(estimator_table(sys, ex.trajectory, r.frames)));
      out << "wrote " << path.string() << '\n';
    }
    const auto summary = cfg.out_dir / "summary.json";
    write_file_atomic(summary, summary_json(ex).dump(2) + "\n");
    out << "wrote " << summary.string() << '\n';
    const auto script = cfg.out_dir / "plot_figures.py";
    write_file_atomic(script, plot_script(ex));
    out << "wrote " << script.string() << '\n';

    for (const auto& r : ex.results) {
      out << std::left << std::setw(14) << name(r.estimator) << " y_err_var =";
      for (Eigen::Index i = 0; i < r.stats.y_err_var.size(); ++i) {
        out << ' ' << format_double(r.stats.y_err_var(i));
      }
      out << '\n';
    }
    return kExitOk;
  });
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const DiscreteSystem sys = load_config_system(cfg);
    const Experiment ex = run_experiment(sys, cfg);

    out << std::left << std::setw(8) << "output";
    for (const auto& r : ex.results) out << std::setw(26) << (name(r.estimator) + " var");
    const auto ratios = variance_ratios(ex);
    for (const auto& row : ratios) {
      out << std::setw(26) << ("ss_legacy/" + name(row.corrected));
    }
    out << '\n';
    for (Eigen::Index i = 0; i < sys.ny(); ++i) {
      out << std::setw(8) << ("y" + std::to_string(i + 1));
      for (const auto& r : ex.results) out << std::setw(26) << format_double(r.stats.y_err_var(i));
      for (const auto& row : ratios) out << std::setw(26) << format_double(row.ratio(i));
      out << '\n';
    }
    return kExitOk;
  });
}

}  // namespace feedkal::cli

#endif  // FEEDKAL_CLI_HPP
