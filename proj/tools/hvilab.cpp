#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "hvi/experiment.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalid = 2 };

void apply_overrides(hvi::ExperimentConfig& c, const std::optional<std::string>& out,
                     const std::optional<std::uint64_t>& seed, const std::optional<int>& threads) {
  if (out) c.out_dir = *out;
  if (seed) c.seed = *seed;
  if (threads) c.threads = *threads;
}

int cmd_validate(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
                 const std::optional<int>& threads) {
  hvi::Diagnostics d;
  try {
    hvi::ExperimentConfig c = hvi::parse_config(path);
    apply_overrides(c, out, seed, threads);
    d = hvi::validate_config(c);
  } catch (const hvi::ConfigError& e) {
    d.ok = false;
    d.messages.push_back(e.what());
  }
  for (const auto& m : d.messages) std::cout << m << '\n';
  std::cout << hvi::summary_text(d.resolved);
  return d.ok ? kOk : kInvalid;
}

int cmd_run(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
            const std::optional<int>& threads) {
  hvi::ExperimentConfig c;
  try {
    c = hvi::parse_config(path);
    apply_overrides(c, out, seed, threads);
    hvi::check_values(c);
    hvi::validate(hvi::build_problem(c));
  } catch (const hvi::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const hvi::ProblemError& e) {
    std::cerr << "invalid problem: " << e.what() << '\n';
    return kInvalid;
  }
  try {
    const hvi::ExperimentResult r = hvi::run_experiment(c);
    std::cout << hvi::summary_text(r.summary);
    std::cout << "wrote " << r.files.size() + 1 << " files to " << r.dir.string() << '\n';
    if (!r.ok) {
      std::cerr << "rejected: " << r.message << '\n';
      return kFailure;
    }
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kFailure;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"hvilab: finite-element experiments for boundary hemivariational inequalities"};
  app.require_subcommand(1);

  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--seed", seed, "64-bit seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  std::string run_path, validate_path;
  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run->add_option("config", run_path, "experiment configuration")->required();
  run->fallthrough();
  auto* val = app.add_subcommand("validate", "check a configuration without solving");
  val->add_option("config", validate_path, "experiment configuration")->required();
  val->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }
  if (run->parsed()) return cmd_run(run_path, out, seed, threads);
  return cmd_validate(validate_path, out, seed, threads);
}
