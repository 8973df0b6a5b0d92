// matchfn: simulate panels, recover matching efficiency and elasticities, plot.
//
// Exit codes: 0 success, 2 input error, 3 estimation degraded, 1 anything else.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "matchfn/config.hpp"
#include "matchfn/error.hpp"
#include "matchfn/pipeline.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitDegraded = 3;

struct Overrides {
  std::string config;
  std::string input;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

matchfn::RunConfig resolve(const Overrides& o) {
  auto cfg = o.config.empty() ? matchfn::RunConfig{} : matchfn::load_config(o.config);
  if (!o.input.empty()) cfg.input = o.input;
  if (!o.out.empty()) cfg.output = o.out;
  if (o.seed) cfg.seed = *o.seed;
  // --threads beats MATCHFN_THREADS beats [run] threads.
  if (o.threads) {
    cfg.threads = *o.threads;
  } else if (auto env = matchfn::threads_from_environment()) {
    cfg.threads = *env;
  }
  cfg.validate();
  return cfg;
}

void print(const matchfn::pipeline::CommandReport& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& n : r.notes) std::cout << n << (n.ends_with('\n') ? "" : "\n");
  for (const auto& p : r.written) std::cout << "wrote " << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric matching-function estimation on labor-market panels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "matchfn 0.1.0");

  Overrides o;
  app.add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--input", o.input, "panel CSV (period,hires,seekers,vacancies[,market])");
  app.add_option("--out", o.out, "output directory (created if missing)");
  app.add_option("--seed", o.seed, "random seed for simulate and validate");
  app.add_option("--threads", o.threads, "worker threads; 0 uses all cores")->check(CLI::NonNegativeNumber);

  bool print_defaults = false;
  app.add_flag("--print-config", print_defaults, "print the default configuration and exit");

  app.fallthrough();  // global options may follow the subcommand
  auto* simulate = app.add_subcommand("simulate", "write panel.csv and truth.csv from the [dgp] spec");
  auto* estimate = app.add_subcommand("estimate", "recover efficiency: efficiency.csv, fitted.csv, fsurface.csv");
  auto* elasticity = app.add_subcommand("elasticity", "LASSO quadratic: elasticity.csv, elasticity_rolling.csv, fit.csv");
  auto* report = app.add_subcommand("report", "rates.svg, efficiency.svg, elasticity.svg, summary.txt");
  auto* validate = app.add_subcommand("validate", "Monte Carlo recovery check: validation.csv, validation_summary.csv");

  // --print-config works without a subcommand.
  app.preparse_callback([&](std::size_t) {
    for (int i = 1; i < argc; ++i) {
      if (std::string(argv[i]) == "--print-config") {
        std::cout << matchfn::default_config_text();
        std::exit(0);
      }
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    const auto cfg = resolve(o);
    matchfn::pipeline::CommandReport r;
    if (simulate->parsed()) r = matchfn::pipeline::cmd_simulate(cfg);
    if (estimate->parsed()) r = matchfn::pipeline::cmd_estimate(cfg);
    if (elasticity->parsed()) r = matchfn::pipeline::cmd_elasticity(cfg);
    if (report->parsed()) r = matchfn::pipeline::cmd_report(cfg);
    if (validate->parsed()) r = matchfn::pipeline::cmd_validate(cfg);
    print(r);
    return 0;
  } catch (const matchfn::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const matchfn::DegradedError& e) {
    std::cerr << "estimation degraded: " << e.what() << '\n';
    return kExitDegraded;
  } catch (const matchfn::SupportError& e) {
    std::cerr << "estimation degraded: " << e.what() << '\n';
    return kExitDegraded;
  } catch (const matchfn::ConvergenceError& e) {
    std::cerr << "estimation degraded: " << e.what() << '\n';
    return kExitDegraded;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
