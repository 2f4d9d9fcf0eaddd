// cnpb <subcommand> [--config FILE] [--seed N] [--threads N] [--out DIR]
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 bad configuration,
// 3 numerical failure.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cnpb.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

int run_subcommand(cnpb::Experiment e, const Flags& f) {
  using namespace cnpb;
  RunConfig c = defaults_for(e);
  if (!f.config.empty()) {
    c = load_config(f.config);
    if (c.experiment != e)
      throw ConfigError("experiment: config is for '" + to_string(c.experiment) + "', subcommand is '" +
                        to_string(e) + "'");
  }
  if (f.seed) c.master_seed = *f.seed;
  if (f.threads) {
    if (*f.threads < 1) throw ConfigError("threads: must be at least 1");
    c.threads = *f.threads;
  }
  if (f.out) c.output_dir = *f.out;
  const json summary = run(c, c.output_dir);
  std::cout << summary.dump(2) << '\n';
  return summary.at("passed").get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pullback densities of SDEs with common noise"};
  app.require_subcommand(1);
  Flags flags;
  std::optional<cnpb::Experiment> chosen;
  for (auto e : {cnpb::Experiment::pullback, cnpb::Experiment::fp_solve, cnpb::Experiment::contraction,
                 cnpb::Experiment::figure1, cnpb::Experiment::ou_validate, cnpb::Experiment::ergodic}) {
    auto* sub = app.add_subcommand(cnpb::to_string(e));
    sub->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads (overrides the config)");
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->callback([e, &chosen] { chosen = e; });
  }
  CLI11_PARSE(app, argc, argv);
  try {
    return run_subcommand(*chosen, flags);
  } catch (const cnpb::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const cnpb::InvalidParameter& ex) {
    std::cerr << "invalid parameter: " << ex.what() << '\n';
    return 2;
  } catch (const cnpb::NumericalFailure& ex) {
    std::cerr << "numerical failure: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 3;
  }
}
