// mcmiss: maximum-likelihood inference for bivariate data whose second wave
// can be missing by several distinct causes.
//
// Subcommands:
//   simulate  draw a cause-coded dataset under a hierarchical model
//   fit       maximize the full / semi-direct / direct likelihood
//   scenario  run a Monte Carlo study arm-by-arm and write summary tables
//   verify    check the ignorability propositions by exact enumeration
//   curves    emit the fitted cause-1 mechanism over a y1 grid
//
// Exit codes are listed per subcommand below; parse failures are 1.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "mcmiss/discrete.hpp"
#include "mcmiss/estimation.hpp"
#include "mcmiss/io.hpp"
#include "mcmiss/mechanisms.hpp"
#include "mcmiss/simulation.hpp"

namespace {

using namespace mcmiss;

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitWrite = 2;
constexpr int kExitStructure = 3;
constexpr int kExitNoConverge = 4;
constexpr int kExitPolarity = 5;

struct SimulateArgs {
  std::string theta_file, model_file, out;
  std::string latent_out;
  std::size_t n = 100;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& args) {
  ThetaParams theta(0, 0, 1, 1, 0);
  HierarchicalModel model{{}};
  try {
    theta = io::read_theta(args.theta_file);
    const io::ModelConfig config = io::read_model_config(args.model_file);
    const auto* h = std::get_if<HierarchicalModel>(&config.model);
    if (!h) {
      std::cerr << "simulate: field 'structure' must be 'hierarchical' for "
                   "data generation\n";
      return kExitParse;
    }
    model = *h;
  } catch (const io::parse_error& e) {
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitParse;
  }

  RandomStream stream(args.seed);
  const GeneratedDataset gen = simulate_dataset(theta, model, args.n, stream);
  try {
    io::write_dataset(args.out, gen.data);
    if (!args.latent_out.empty()) {
      std::string latent = "id,y1,y2,m2\n";
      for (std::size_t i = 0; i < gen.data.records.size(); ++i) {
        latent += std::to_string(i);
        latent += ',';
        latent += io::format_double(gen.data.records[i].y1);
        latent += ',';
        latent += io::format_double(gen.latent_y2[i]);
        latent += ',';
        latent += std::to_string(gen.data.records[i].m2);
        latent += '\n';
      }
      io::atomic_write(args.latent_out, latent);
    }
  } catch (const io::write_error& e) {
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitWrite;
  }
  return kExitOk;
}

struct FitArgs {
  std::string data_file, model_file, out;
  std::string likelihood;
  bool probe = false;
};

int run_fit(const FitArgs& args) {
  try {
    const io::ModelConfig config = io::read_model_config(args.model_file);
    LikelihoodKind kind = LikelihoodKind::full;
    if (!args.likelihood.empty()) {
      const auto k = io::likelihood_kind_from_string(args.likelihood);
      if (!k) {
        std::cerr << "fit: unknown likelihood '" << args.likelihood << "'\n";
        return kExitParse;
      }
      kind = *k;
    } else if (config.likelihood) {
      kind = *config.likelihood;
    }

    const Dataset data =
        io::read_dataset(args.data_file, cause_count(config.model));
    const ValidationReport report = validate_dataset(data);
    if (!report.valid()) {
      std::cerr << "fit: invalid dataset: " << report.issues.front().message
                << "\n";
      return kExitParse;
    }
    if (data.cause_count > cause_count(config.model)) {
      std::cerr << "fit: dataset cause codes exceed the model's cause count\n";
      return kExitParse;
    }

    FitOptions opts;
    opts.probe = args.probe;
    std::optional<FitResult> result;
    try {
      result = fit(config.model, kind, data, opts);
    } catch (const structure_error& e) {
      std::cerr << "fit: " << e.what() << "\n";
      return kExitStructure;
    }
    io::atomic_write(args.out, io::fit_result_to_json(config.model, *result));
    if (!result->converged) {
      std::cerr << "fit: optimizer did not meet the convergence tolerance "
                   "(result written)\n";
      return kExitNoConverge;
    }
    return kExitOk;
  } catch (const io::parse_error& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitParse;
  } catch (const io::write_error& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitWrite;
  }
}

struct ScenarioArgs {
  std::string id, out_dir;
  int reps = 500;
  std::size_t n = 100;
  std::uint64_t seed = 20240501;
  int threads = 0;
};

int run_scenario_cmd(const ScenarioArgs& args) {
  try {
    ScenarioSpec spec = ScenarioSpec::standard(args.id, args.n, args.reps,
                                               args.seed);
    spec.threads = args.threads;
    const ScenarioResult result = run_scenario(spec);

    const std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    io::atomic_write(dir / "estimates.csv", io::scenario_estimates_csv(result));
    io::atomic_write(dir / "rmse.csv", io::scenario_rmse_csv(result));
    io::atomic_write(dir / "boxplot.csv", io::scenario_boxplot_csv(result));
    io::atomic_write(dir / "meta.json", io::scenario_meta_json(result));
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "scenario: " << e.what() << "\n";
    return kExitParse;
  } catch (const io::write_error& e) {
    std::cerr << "scenario: " << e.what() << "\n";
    return kExitWrite;
  }
}

struct VerifyArgs {
  std::string prop, out;
};

int run_verify(const VerifyArgs& args) {
  const discrete::PropertyVerdict verdict = discrete::check_proposition(args.prop);

  nlohmann::json j;
  j["proposition"] = verdict.proposition;
  j["holds"] = verdict.holds;
  j["max_deviation"] = verdict.max_deviation;
  j["witness"] = verdict.witness;
  j["detail"] = verdict.detail;
  try {
    io::atomic_write(args.out, j.dump(2) + "\n");
  } catch (const io::write_error& e) {
    std::cerr << "verify: " << e.what() << "\n";
    return kExitWrite;
  }

  const bool expect_holds =
      args.prop == "1" || args.prop == "3" || args.prop == "pmar";
  const bool ok = expect_holds
                      ? verdict.holds
                      : (!verdict.holds && !verdict.witness.empty());
  if (!ok) {
    std::cerr << "verify: proposition " << args.prop
              << " did not reach its expected polarity\n";
    return kExitPolarity;
  }
  return kExitOk;
}

struct CurvesArgs {
  std::string fit_file, grid, out;
  double ref_p = -1.0;  // negative = no reference column
};

int run_curves(const CurvesArgs& args) {
  try {
    const io::LoadedFit fit = io::read_fit_result(args.fit_file);

    double lo = 0.0, hi = 0.0;
    long steps = 0;
    {
      const auto p1 = args.grid.find(':');
      const auto p2 = args.grid.find(':', p1 == std::string::npos ? 0 : p1 + 1);
      if (p1 == std::string::npos || p2 == std::string::npos)
        throw io::parse_error("grid must be lo:hi:steps");
      try {
        lo = std::stod(args.grid.substr(0, p1));
        hi = std::stod(args.grid.substr(p1 + 1, p2 - p1 - 1));
        steps = std::stol(args.grid.substr(p2 + 1));
      } catch (const std::exception&) {
        throw io::parse_error("grid must be lo:hi:steps with numeric fields");
      }
      if (steps < 1) throw io::parse_error("grid steps must be >= 1");
    }

    const auto causes = model_causes(fit.model);
    const CauseEntry* cause1 = nullptr;
    for (const CauseEntry& e : causes)
      if (e.code == 1) cause1 = &e;
    if (!cause1) throw io::parse_error("fit file has no cause-1 mechanism");
    if (classify_mechanism(cause1->mechanism) == MechanismClass::nmar)
      throw io::parse_error(
          "cause-1 mechanism reads y2; P(M2=1 | y1) is not a curve in y1");

    std::string out = args.ref_p >= 0.0 ? "y1,p_cause1,ref_p\n" : "y1,p_cause1\n";
    for (long k = 0; k < steps; ++k) {
      const double y1 =
          steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) /
                                     static_cast<double>(steps - 1);
      const double p = cause_prob(cause1->mechanism, y1, std::nullopt);
      out += io::format_double(y1);
      out += ',';
      out += io::format_double(p);
      if (args.ref_p >= 0.0) {
        out += ',';
        out += io::format_double(args.ref_p);
      }
      out += '\n';
    }
    io::atomic_write(args.out, out);
    return kExitOk;
  } catch (const io::parse_error& e) {
    std::cerr << "curves: " << e.what() << "\n";
    return kExitParse;
  } catch (const io::write_error& e) {
    std::cerr << "curves: " << e.what() << "\n";
    return kExitWrite;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maximum-likelihood inference for bivariate data with "
               "multi-cause missingness"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "draw a cause-coded dataset under a hierarchical model");
  c_sim->add_option("--theta-file", sim.theta_file, "theta JSON file")
      ->required();
  c_sim->add_option("--model-file", sim.model_file, "model JSON file")
      ->required();
  c_sim->add_option("--n", sim.n, "sample size")->required();
  c_sim->add_option("--seed", sim.seed, "RNG seed")->required();
  c_sim->add_option("--out", sim.out, "output dataset CSV")->required();
  c_sim->add_option("--latent-out", sim.latent_out,
                    "optional CSV with the true y2 of every record");

  FitArgs fita;
  CLI::App* c_fit = app.add_subcommand("fit", "fit a model to a dataset");
  c_fit->add_option("--data", fita.data_file, "dataset CSV")->required();
  c_fit->add_option("--model-file", fita.model_file, "model JSON file")
      ->required();
  c_fit
      ->add_option("--likelihood", fita.likelihood,
                   "full | semi-direct | direct")
      ->check(CLI::IsMember({"full", "semi-direct", "direct"}));
  c_fit->add_option("--out", fita.out, "output fit JSON")->required();
  c_fit->add_flag("--probe", fita.probe,
                  "attach a finite-difference Hessian spectrum");

  ScenarioArgs scen;
  CLI::App* c_scen = app.add_subcommand(
      "scenario", "run one Monte Carlo scenario and write summary tables");
  c_scen->add_option("--id", scen.id, "scenario id")
      ->check(CLI::IsMember({"i", "ii", "iii"}))
      ->required();
  c_scen->add_option("--reps", scen.reps, "replication count")
      ->check(CLI::PositiveNumber);
  c_scen->add_option("--n", scen.n, "sample size per replication");
  c_scen->add_option("--seed", scen.seed, "base seed");
  c_scen->add_option("--threads", scen.threads,
                     "worker threads (0 = hardware)");
  c_scen->add_option("--out-dir", scen.out_dir, "output directory")
      ->required();

  VerifyArgs ver;
  CLI::App* c_ver = app.add_subcommand(
      "verify", "verify an ignorability proposition by exact enumeration");
  c_ver->add_option("--prop", ver.prop, "1 | 2 | 3 | 4 | pmar")
      ->check(CLI::IsMember({"1", "2", "3", "4", "pmar"}))
      ->required();
  c_ver->add_option("--out", ver.out, "output verdict JSON")->required();

  CurvesArgs cur;
  CLI::App* c_cur = app.add_subcommand(
      "curves", "emit the fitted cause-1 mechanism over a y1 grid");
  c_cur->add_option("--fit", cur.fit_file, "fit JSON file")->required();
  c_cur->add_option("--grid", cur.grid, "lo:hi:steps")->required();
  c_cur->add_option("--out", cur.out, "output CSV")->required();
  c_cur->add_option("--ref-p", cur.ref_p,
                    "emit a constant reference column with this value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  if (c_sim->parsed()) return run_simulate(sim);
  if (c_fit->parsed()) return run_fit(fita);
  if (c_scen->parsed()) return run_scenario_cmd(scen);
  if (c_ver->parsed()) return run_verify(ver);
  if (c_cur->parsed()) return run_curves(cur);
  return kExitParse;
}
