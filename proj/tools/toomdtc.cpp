#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "toomdtc/config.hpp"
#include "toomdtc/scenario.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> engine;
  bool quick = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "TOML run configuration")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "64-bit run seed");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--engine", f.engine, "pca or langevin")->check(CLI::IsMember({"pca", "langevin"}));
  sub->add_flag("--quick", f.quick, "CI tier: 16x16, 10 realizations, window from t = 400");
}

toomdtc::RunConfig resolve(const CommonFlags& f) {
  toomdtc::RunConfig cfg = f.config.empty() ? toomdtc::RunConfig{} : toomdtc::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.threads) cfg.threads = *f.threads;
  if (f.engine) cfg.engine = *f.engine == "pca" ? toomdtc::Engine::pca : toomdtc::Engine::langevin;
  if (f.quick) cfg.apply_quick();
  cfg.validate();
  return cfg;
}

const char* describe(const std::string& name) {
  if (name == "pca-run") return "order-parameter series from the direct PCA engine";
  if (name == "langevin-run") return "stroboscopic Floquet-Langevin trajectory";
  if (name == "phase-scan") return "plateau of the order parameter over the phase grid";
  if (name == "error-bench") return "P_E per rule against the equilibrium estimate";
  if (name == "cumulants") return "scaled box cumulants and their finite-size fits";
  if (name == "correlations") return "connected error correlations";
  if (name == "scgf") return "empirical SCGF and error bound";
  if (name == "correct-trace") return "q_A, q_B around a single injected error";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toom / pi-Toom cellular automata, their Floquet-Langevin emulation, and error statistics"};
  app.require_subcommand(1);
  CommonFlags flags;
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the materialized configuration and exit");
  for (const auto& name : toomdtc::subcommands()) add_common(app.add_subcommand(name, describe(name)), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  toomdtc::RunConfig cfg;
  try {
    cfg = resolve(flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  if (print_config) {
    std::cout << toomdtc::to_toml(cfg);
    return 0;
  }
  try {
    const auto result = toomdtc::run_scenario(command, cfg);
    for (const auto& p : result.points)
      if (!p.ok) std::cerr << "grid point failed: " << p.label << ": " << p.error << '\n';
    std::cout << command << ": wrote";
    for (const auto& f : result.files) std::cout << ' ' << f;
    std::cout << " to " << cfg.out << '\n';
    return result.exit_code;
  } catch (const toomdtc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
