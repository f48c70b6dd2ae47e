#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ernest/data/cache.hpp"
#include "ernest/data/dataset.hpp"
#include "ernest/data/synthetic.hpp"
#include "ernest/errors.hpp"
#include "ernest/eval/evaluate.hpp"
#include "ernest/features/embedder.hpp"
#include "ernest/pipeline/config.hpp"
#include "ernest/pipeline/pipeline.hpp"
#include "ernest/selection/ranking.hpp"

namespace {

namespace fs = std::filesystem;

// Relative output paths land under ERNEST_OUTPUT_ROOT when it is set.
fs::path resolve_output(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("ERNEST_OUTPUT_ROOT")) {
    return fs::path(root) / p;
  }
  return p;
}

ernest::data::Dataset load_input_dataset(const std::string& path,
                                         const std::vector<std::string>& blacklist,
                                         const std::optional<std::string>& condition) {
  std::optional<ernest::data::Stimulus> stim;
  if (condition) stim = ernest::data::stimulus_from_name(*condition);
  if (fs::is_directory(path)) {
    return ernest::data::load_dataset(path, blacklist, stim ? &*stim : nullptr);
  }
  return ernest::data::read_dataset_cache(path);
}

struct RunArgs {
  std::string config_path;
  std::string out_override;
  std::size_t jobs = 0;
  bool jobs_set = false;
  std::uint64_t master_seed = 0;
  bool seed_set = false;
};

void execute_run(const RunArgs& args, bool ablation) {
  ernest::pipeline::PipelineConfig cfg =
      ernest::pipeline::load_pipeline_config(args.config_path);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  if (args.jobs_set) cfg.jobs = args.jobs;
  if (args.seed_set) cfg.master_seed = args.master_seed;
  cfg.output_dir = resolve_output(cfg.output_dir).string();
  const auto outcome = ernest::pipeline::run_pipeline(cfg, ablation, &std::cerr);

  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : outcome.stages) {
    stages.push_back({{"name", s.name}, {"reused", s.reused}});
  }
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& e : outcome.delta_ranking.entries) {
    ranking.push_back(e.channel_index);
  }
  nlohmann::json summary = {{"output_dir", outcome.output_dir.string()},
                            {"stages", stages},
                            {"dataset", outcome.dataset_summary},
                            {"delta_ranking", ranking},
                            {"eval", outcome.eval.at("arms")}};
  std::cout << summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG trial embedding, ensemble channel selection and evaluation"};
  app.require_subcommand(1);

  std::string ingest_root, ingest_out = "dataset.erns";
  std::vector<std::string> blacklist = {"X", "Y", "nd"};
  std::string condition;
  auto* ingest = app.add_subcommand(
      "ingest", "Parse a tree of EEG trial files into a dataset cache");
  ingest->add_option("root", ingest_root, "directory of trial files")
      ->required();
  ingest->add_option("-o,--out", ingest_out, "cache file to write");
  ingest->add_option("--blacklist", blacklist, "channel names to drop")
      ->delimiter(',');
  ingest->add_option("--condition", condition,
                     "keep only this stimulus condition");

  ernest::data::SyntheticConfig synth_cfg;
  synth_cfg.informative_channels = {2, 7, 11};
  synth_cfg.coupled_pairs = {{5, 12}};
  std::vector<std::string> coupled_args;
  std::string synth_out = "synthetic.erns";
  auto* synth = app.add_subcommand(
      "synth", "Generate a labeled synthetic dataset cache");
  synth->add_option("-o,--out", synth_out, "cache file to write");
  synth->add_option("--subjects", synth_cfg.n_subjects, "subject count");
  synth->add_option("--trials", synth_cfg.trials_per_subject,
                    "trials per subject");
  synth->add_option("--channels", synth_cfg.channels, "channel count");
  synth->add_option("--samples", synth_cfg.samples_per_channel,
                    "samples per channel");
  synth->add_option("--informative", synth_cfg.informative_channels,
                    "independently informative channel indices")
      ->delimiter(',');
  synth->add_option("--coupled", coupled_args,
                    "coupled channel pairs as a:b")
      ->delimiter(',');
  synth->add_option("--effect-size", synth_cfg.effect_size,
                    "amplitude gap in noise units");
  synth->add_option("--noise-sigma", synth_cfg.noise_sigma, "noise level");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");

  RunArgs run_args;
  auto* run = app.add_subcommand(
      "run", "Execute the full pipeline from a config file");
  auto* ablate = app.add_subcommand(
      "ablate", "As run, but evaluate the accuracy-ranking arm as well");
  for (auto* sub : {run, ablate}) {
    sub->add_option("-c,--config", run_args.config_path, "config JSON file")
        ->required();
    sub->add_option("-o,--out", run_args.out_override,
                    "output directory (overrides config)");
    sub->add_option("-j,--jobs", run_args.jobs, "worker count")
        ->check(CLI::PositiveNumber);
    sub->add_option("--master-seed", run_args.master_seed,
                    "master seed (overrides config)");
  }

  std::string reduce_embedders, reduce_ranking, reduce_data,
      reduce_out = "reduced.csv";
  std::size_t reduce_k = 0, reduce_jobs = 1;
  auto* reduce = app.add_subcommand(
      "reduce",
      "Apply saved embedders and a ranking to new trials, writing a CSV");
  reduce->add_option("--embedders", reduce_embedders, "embedder bundle dir")
      ->required();
  reduce->add_option("--ranking", reduce_ranking, "ranking CSV file")
      ->required();
  reduce->add_option("-k", reduce_k, "number of channels to keep")->required();
  reduce->add_option("--data", reduce_data, "trial-file dir or dataset cache")
      ->required();
  reduce->add_option("-o,--out", reduce_out, "CSV file to write");
  reduce->add_option("--blacklist", blacklist, "channel names to drop")
      ->delimiter(',');
  reduce->add_option("--condition", condition,
                     "keep only this stimulus condition");
  reduce->add_option("-j,--jobs", reduce_jobs, "worker count")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);

    const std::optional<std::string> cond =
        condition.empty() ? std::nullopt
                          : std::optional<std::string>(condition);
    if (*ingest) {
      if (!fs::is_directory(ingest_root)) {
        throw ernest::ConfigError("ingest expects a directory of trial files");
      }
      const auto ds = load_input_dataset(ingest_root, blacklist, cond);
      ernest::data::write_dataset_cache(ds, resolve_output(ingest_out));
      std::cout << ernest::pipeline::dataset_summary_json(ds, nullptr).dump(2)
                << "\n";
    } else if (*synth) {
      if (synth->count("--coupled") > 0) {
        synth_cfg.coupled_pairs.clear();
        for (const auto& arg : coupled_args) {
          if (arg == "none") continue;
          const auto sep = arg.find(':');
          if (sep == std::string::npos) {
            throw ernest::ConfigError("coupled pair '" + arg +
                                      "' is not of the form a:b");
          }
          synth_cfg.coupled_pairs.emplace_back(
              static_cast<std::size_t>(
                  ernest::parse_double(arg.substr(0, sep))),
              static_cast<std::size_t>(
                  ernest::parse_double(arg.substr(sep + 1))));
        }
      }
      const auto result = ernest::data::generate_synthetic(synth_cfg);
      ernest::data::write_dataset_cache(result.dataset,
                                        resolve_output(synth_out));
      std::cout << ernest::pipeline::dataset_summary_json(
                       result.dataset, &result.ground_truth)
                       .dump(2)
                << "\n";
    } else if (*run) {
      run_args.jobs_set = run->count("--jobs") > 0;
      run_args.seed_set = run->count("--master-seed") > 0;
      execute_run(run_args, false);
    } else if (*ablate) {
      run_args.jobs_set = ablate->count("--jobs") > 0;
      run_args.seed_set = ablate->count("--master-seed") > 0;
      execute_run(run_args, true);
    } else if (*reduce) {
      const auto embedders = ernest::features::load_embedder_bundle(reduce_embedders);
      const auto ranking =
          ernest::selection::ranking_from_csv(ernest::read_file(reduce_ranking));
      const auto selected = ernest::selection::select_top_k(ranking, reduce_k);
      const auto ds = load_input_dataset(reduce_data, blacklist, cond);
      const auto a =
          ernest::eval::reduce_new_trials(embedders, selected, ds, reduce_jobs);
      ernest::write_file(resolve_output(reduce_out),
                         ernest::eval::reduced_matrix_to_csv(a));
      const nlohmann::json summary = {{"rows", a.values.rows()},
                                      {"columns", a.values.cols()},
                                      {"metric", ranking.metric},
                                      {"selected_channels", selected}};
      std::cout << summary.dump(2) << "\n";
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ernest::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
