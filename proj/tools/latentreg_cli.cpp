#include "latentreg/error.hpp"
#include "latentreg/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

using namespace latentreg;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("--seeds: descending range " + item);
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("--seeds: cannot parse '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global versus localized regression diagnostics in a learned latent space"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic cohort with planted subgroups");
  std::string synth_config, synth_out = ".";
  std::optional<long long> s_n, s_p, s_d;
  std::optional<double> s_noise;
  std::optional<std::uint64_t> s_seed;
  synth->add_option("--config", synth_config, "JSON file: a run config with data.synthetic, or a bare synthetic block");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--n", s_n, "Subjects");
  synth->add_option("--p", s_p, "Predictors");
  synth->add_option("--d-true", s_d, "Latent factors");
  synth->add_option("--noise-sd", s_noise, "Predictor noise sd");
  synth->add_option("--seed", s_seed, "Generator seed");

  // run
  auto* run = app.add_subcommand("run", "Train, diagnose and write all reports");
  std::string run_config, r_out, r_csv, r_outcome, r_seeds;
  std::optional<int> r_epochs;
  std::optional<double> r_lr, r_lpred, r_lreg;
  std::optional<long long> r_d;
  bool r_bench = false, r_no_pre = false;
  run->add_option("--config", run_config, "Run configuration JSON");
  run->add_option("--out", r_out, "Output directory");
  run->add_option("--csv", r_csv, "Input CSV (replaces the configured data source)");
  run->add_option("--outcome", r_outcome, "Outcome column of --csv");
  run->add_option("--seeds", r_seeds, "Seed list, e.g. 1,2,3 or 1-15");
  run->add_option("--epochs", r_epochs, "Training epochs");
  run->add_option("--lr", r_lr, "Adam learning rate");
  run->add_option("--lambda-pred", r_lpred, "Weight of the localized prediction loss");
  run->add_option("--lambda-reg", r_lreg, "Weight of the latent decorrelation loss");
  run->add_option("--d", r_d, "Latent dimension");
  run->add_flag("--benchmarks", r_bench, "Enable the benchmark arms");
  run->add_flag("--no-preprocess", r_no_pre, "Skip variance and outlier filters");

  // report
  auto* report = app.add_subcommand("report", "Summarize a completed run directory as JSON");
  std::string run_dir, report_out;
  report->add_option("run_dir", run_dir, "Run directory")->required();
  report->add_option("--out", report_out, "Write the summary here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) {
      SynthConfig sc;
      if (!synth_config.empty()) {
        const Json j = read_json(synth_config);
        if (j.contains("data")) {
          const RunConfig rc = run_config_from_json(j);
          if (!rc.data.synthetic) throw ConfigError("config has no data.synthetic block");
          sc = *rc.data.synthetic;
        } else {
          sc = synth_config_from_json(j);
        }
      }
      if (s_n) sc.n = *s_n;
      if (s_p) sc.p = *s_p;
      if (s_d) sc.d_true = *s_d;
      if (s_noise) sc.noise_sd = *s_noise;
      if (s_seed) sc.seed = *s_seed;
      for (const auto& f : cmd_synth(sc, synth_out)) std::cout << f.generic_string() << '\n';
    } else if (*run) {
      RunConfig rc;
      if (!run_config.empty()) rc = run_config_from_json(read_json(run_config));
      if (!r_out.empty()) rc.output_dir = r_out;
      if (!r_csv.empty()) {
        rc.data.csv = r_csv;
        rc.data.synthetic.reset();
      }
      if (!r_outcome.empty()) rc.data.outcome_column = r_outcome;
      if (!r_seeds.empty()) rc.seeds = parse_seeds(r_seeds);
      if (r_epochs) rc.train.epochs = *r_epochs;
      if (r_lr) rc.train.lr = *r_lr;
      if (r_lpred) rc.train.lambda_pred = *r_lpred;
      if (r_lreg) rc.train.lambda_reg = *r_lreg;
      if (r_d) rc.train.d = *r_d;
      if (r_bench) rc.benchmarks.enabled = true;
      if (r_no_pre) rc.preprocess.enabled = false;
      cmd_run(rc);
      std::cout << (rc.output_dir / "manifest.json").generic_string() << '\n';
    } else if (*report) {
      const Json summary = cmd_report(run_dir);
      if (report_out.empty())
        std::cout << summary.dump(2) << '\n';
      else
        write_json(report_out, summary);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
