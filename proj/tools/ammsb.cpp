// Command line front end: run an experiment, generate a synthetic graph, or
// score a checkpoint against held-out pairs.

#include <CLI11.hpp>

#include <iostream>

#include "ammsb/error.hpp"
#include "ammsb/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-gradient Riemannian Langevin sampling for assortative MMSB"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run the sampler described by a config file");
  run->add_option("config", run_config, "key = value config file")->required()->check(CLI::ExistingFile);

  std::string synth_config;
  auto* synth = app.add_subcommand("synth", "Write a synthetic a-MMSB graph and its ground truth");
  synth->add_option("config", synth_config, "key = value config file")->required()->check(CLI::ExistingFile);

  std::string checkpoint, dataset;
  double delta = 1e-7;
  auto* eval = app.add_subcommand("eval", "Held-out perplexity of a checkpoint");
  eval->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("dataset", dataset, "held-out pairs (a b y) or an edge list")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--delta", delta, "background link probability")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = ammsb::ExperimentConfig::load(run_config);
      const auto result = ammsb::run_experiment(cfg);
      std::cout << "final perplexity " << result.final_perplexity << " (constant-rate baseline "
                << result.constant_rate_perplexity << ") after " << result.iterations
                << " iterations, " << result.sampling_seconds << " s sampling\n";
      if (result.mean_mem_ratio) {
        std::cout << "memory ratio mean " << *result.mean_mem_ratio << " max "
                  << *result.max_mem_ratio << '\n';
      }
      if (result.accept_rate) std::cout << "acceptance rate " << *result.accept_rate << '\n';
      std::cout << "outputs in " << cfg.out_dir.string() << '\n';
    } else if (*synth) {
      const auto cfg = ammsb::SynthConfig::load(synth_config);
      const auto data = ammsb::make_synthetic(cfg);
      std::cout << "wrote " << data.graph.num_nodes() << " nodes, " << data.graph.num_links()
                << " links (density " << data.graph.density() << ") to "
                << cfg.out_dir.string() << '\n';
    } else if (*eval) {
      const auto res = ammsb::evaluate_checkpoint(checkpoint, dataset, delta);
      std::cout << "perplexity " << res.perplexity << " over " << res.pairs << " pairs\n";
    }
  } catch (const ammsb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
