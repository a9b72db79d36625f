#include <rejaug/experiments.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

// rejaug: Monte Carlo inference for models whose generative process is a
// rejection sampler. Exit codes: 0 success, 1 numerical failure, 2 I/O or
// configuration failure.

namespace {

rejaug::RunManifest load_manifest(const std::string& config_path, std::uint64_t seed_override,
                                  bool seed_set) {
  rejaug::RunManifest m = rejaug::RunManifest::load(config_path);
  if (seed_set) m.doc()["seed"] = seed_override;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-augmentation Monte Carlo for rejection-sampled models"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", study;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  double scale = 1.0;
  std::vector<std::string> trace_files;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* copt = cmd->add_option("--config", config_path, "manifest file (JSON or key = value)");
    if (needs_config) copt->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the manifest seed")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--threads", threads, "chain-level parallelism");
  };

  auto* fit = app.add_subcommand("fit", "posterior inference per the manifest");
  add_common(fit, true);

  auto* prior = app.add_subcommand("sample-prior", "generative simulation per the manifest");
  add_common(prior, true);

  auto* rep = app.add_subcommand("reproduce", "run a canned comparison study");
  rep->add_option("study", study, "fig3-ess | approx-bias | gpds-synthetic")->required();
  rep->add_option("--scale", scale, "shrink iteration counts, in (0,1]");
  add_common(rep, false);

  auto* diag = app.add_subcommand("diagnose", "ESS / comparison tables from trace CSVs");
  diag->add_option("traces", trace_files, "trace CSV files")->required()->expected(-2);
  diag->add_option("--out", out_dir, "output directory");

  auto* ingest = app.add_subcommand("ingest-check", "validate a dataset against its manifest");
  ingest->add_option("--config", config_path, "manifest file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(fit)) return rejaug::cmd_fit(load_manifest(config_path, seed, seed_set), out_dir, threads);
    if (app.got_subcommand(prior))
      return rejaug::cmd_sample_prior(load_manifest(config_path, seed, seed_set), out_dir);
    if (app.got_subcommand(rep)) return rejaug::cmd_reproduce(study, scale, seed, out_dir, threads);
    if (app.got_subcommand(diag)) return rejaug::cmd_diagnose(trace_files, out_dir);
    if (app.got_subcommand(ingest))
      return rejaug::cmd_ingest_check(load_manifest(config_path, seed, seed_set), std::cout);
  } catch (const rejaug::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rejaug::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
