#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "catpose/errors.hpp"
#include "catpose/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<int> jobs;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_preset) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--seed", c.seed, "master seed, overrides the config");
  if (with_preset) app->add_option("--preset", c.preset, "fitter preset: A1 A2 A3 B1 B2 C D");
  app->add_option("--jobs", c.jobs, "instances processed in parallel");
  app->add_option("--out", c.out, "output path")->required();
}

catpose::ExperimentConfig resolve(const Common& c) {
  catpose::ExperimentConfig cfg =
      c.config.empty() ? catpose::ExperimentConfig{} : catpose::load_experiment(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.preset) cfg.preset = *c.preset;
  if (c.jobs) cfg.jobs = *c.jobs;
  catpose::validate_experiment(cfg);
  return cfg;
}

void print_summary(const catpose::CommandSummary& s) {
  std::printf("instances %d  failed %d  median rotation error %.4g deg  median translation error %.4g m\n",
              s.instances, s.failed, s.median_rotation_error, s.median_translation_error);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Category-level 9DoF pose fitting experiments"};
  app.require_subcommand(1);

  Common gen_o, fit_o, solve_o;
  std::string fit_bundle, solve_bundle, eval_results, eval_bundle, eval_out, gc_out, gc_fault;
  std::uint64_t gc_seed = 0;
  int gc_trials = 100;

  auto* gen = app.add_subcommand("gen", "generate an instance bundle");
  add_common(gen, gen_o, false);

  auto* fitc = app.add_subcommand("fit", "fit every instance of a bundle");
  add_common(fitc, fit_o, true);
  fitc->add_option("bundle", fit_bundle, "bundle directory")->required();

  auto* solve = app.add_subcommand("solve", "two-stage baseline on the stored coordinates");
  add_common(solve, solve_o, false);
  solve->add_option("bundle", solve_bundle, "bundle directory")->required();

  auto* eval = app.add_subcommand("eval", "score results against a bundle");
  eval->add_option("results", eval_results, "results JSON")->required();
  eval->add_option("bundle", eval_bundle, "bundle directory")->required();
  eval->add_option("--out", eval_out, "report directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
  gc->add_option("--seed", gc_seed, "seed");
  gc->add_option("--trials", gc_trials, "configurations per term");
  gc->add_option("--out", gc_out, "optional JSON report");
  gc->add_option("--fault", gc_fault, "test hook: perturb the gradient of this term");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const auto cfg = resolve(gen_o);
      catpose::cmd_gen(cfg, gen_o.out);
      std::printf("wrote %zu instances to %s\n",
                  cfg.generation.categories.size() * static_cast<std::size_t>(cfg.generation.count),
                  gen_o.out.c_str());
    } else if (*fitc) {
      print_summary(catpose::cmd_fit(resolve(fit_o), fit_bundle, fit_o.out));
    } else if (*solve) {
      print_summary(catpose::cmd_solve(resolve(solve_o), solve_bundle, solve_o.out));
    } else if (*eval) {
      const auto rep = catpose::cmd_eval(eval_results, eval_bundle, eval_out);
      for (const auto& [name, v] : catpose::precision_fields(rep.overall)) {
        std::printf("%-10s %.4f\n", name.c_str(), v);
      }
    } else if (*gc) {
      catpose::GradcheckOptions opt;
      opt.seed = gc_seed;
      opt.trials = gc_trials;
      opt.fault_term = gc_fault;
      return catpose::cmd_gradcheck(opt, gc_out) ? 0 : 3;
    }
  } catch (const catpose::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
