#include "latentreg/pipeline.hpp"

#include "latentreg/benchmarks.hpp"
#include "latentreg/diagnostics.hpp"
#include "latentreg/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace latentreg {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + (ctx.empty() ? "" : ctx + ".") + item.key() + "'");
}

template <class T>
void take(const Json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("invalid value for '" + ctx + "." + key + "'");
  }
}

std::string rel(const fs::path& p) { return p.generic_string(); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

double to_double(const std::string& s) {
  if (s.empty()) return std::nan("");
  return std::strtod(s.c_str(), nullptr);
}

// Writes files under one root and remembers them for the manifest inventory.
class OutputSet {
 public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) {}

  fs::path add(const fs::path& relative) {
    files_.push_back(relative);
    return root_ / relative;
  }

  Json inventory() const {
    std::vector<fs::path> sorted = files_;
    std::sort(sorted.begin(), sorted.end());
    Json out = Json::array();
    for (const auto& f : sorted) {
      const fs::path full = root_ / f;
      if (!fs::exists(full)) continue;
      out.push_back({{"path", rel(f)}, {"sha256", sha256_file(full)}, {"bytes", fs::file_size(full)}});
    }
    return out;
  }

 private:
  fs::path root_;
  std::vector<fs::path> files_;
};

std::string seed_dir(std::uint64_t seed) { return "runs/seed_" + std::to_string(seed); }

// A run directory may be reused only if it holds a previous run; its listed files are removed first.
void prepare_output_dir(const fs::path& dir) {
  if (!fs::exists(dir)) {
    fs::create_directories(dir);
    return;
  }
  if (!fs::is_directory(dir)) throw ConfigError("output_dir is not a directory: " + dir.string());
  if (fs::is_empty(dir)) return;
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw ConfigError("output_dir is not empty and holds no previous run: " + dir.string());
  const Json old = read_json(manifest);
  if (old.contains("files"))
    for (const auto& f : old.at("files")) fs::remove(dir / f.at("path").get<std::string>());
  fs::remove(manifest);
}

std::vector<Eigen::Index> top_abs(const Eigen::VectorXd& v, std::size_t count) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(v(a)) > std::abs(v(b)); });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

// Interaction checks one predictor at a time so a collinear predictor is skipped, not fatal.
std::vector<InteractionTest> checked_interactions(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                  const std::vector<Eigen::Index>& members,
                                                  const std::vector<Eigen::Index>& predictors,
                                                  const std::vector<std::string>& names, std::vector<std::string>& notes,
                                                  const std::string& label) {
  std::vector<InteractionTest> out;
  const auto count = static_cast<Eigen::Index>(members.size());
  if (count < 2 || X.rows() - count < 2) {
    notes.push_back(label + ": interaction check skipped (fewer than 2 members or non-members)");
    return out;
  }
  for (const auto j : predictors) {
    try {
      const auto r = interaction_check(X, y, members, {j}, names);
      out.insert(out.end(), r.begin(), r.end());
    } catch (const RuntimeError& e) {
      notes.push_back(label + ": " + e.what());
    }
  }
  return out;
}

std::string threshold_tag(double p) {
  std::string s = format_number(p);
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw RuntimeError("sha256 initialization failed");
  }
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void RunConfig::validate() const {
  if (data.csv.has_value() == data.synthetic.has_value())
    throw ConfigError("data: exactly one of data.csv and data.synthetic must be given");
  if (data.csv && data.outcome_column.empty()) throw ConfigError("data.outcome_column must not be empty");
  if (data.synthetic) data.synthetic->validate();
  if (!(preprocess.variance_threshold >= 0.0)) throw ConfigError("preprocess.variance_threshold must be non-negative");
  if (!(preprocess.outlier_multiplier > 0.0)) throw ConfigError("preprocess.outlier_multiplier must be positive");
  if (!(preprocess.train_fraction > 0.0 && preprocess.train_fraction <= 1.0))
    throw ConfigError("preprocess.train_fraction must lie in (0, 1]");
  train.validate();
  if (!(diagnostics.ci_level > 0.0 && diagnostics.ci_level < 1.0))
    throw ConfigError("diagnostics.ci_level must lie in (0, 1)");
  if (diagnostics.min_size < 1) throw ConfigError("diagnostics.min_size must be at least 1");
  if (diagnostics.n_clusters < 1) throw ConfigError("diagnostics.n_clusters must be at least 1");
  if (diagnostics.top_k < 1) throw ConfigError("diagnostics.top_k must be at least 1");
  for (const double p : benchmarks.screening_p)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("benchmarks.screening_p values must lie in (0, 1]");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds must be distinct");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

Json to_json(const RunConfig& c) {
  Json data = Json::object();
  if (c.data.csv) {
    data["csv"] = c.data.csv->generic_string();
    data["outcome_column"] = c.data.outcome_column;
  }
  if (c.data.synthetic) data["synthetic"] = to_json(*c.data.synthetic);
  const auto& pp = c.preprocess;
  const auto& dg = c.diagnostics;
  const auto& bm = c.benchmarks;
  return {{"data", data},
          {"preprocess",
           {{"enabled", pp.enabled},
            {"variance_threshold", pp.variance_threshold},
            {"outlier_multiplier", pp.outlier_multiplier},
            {"train_fraction", pp.train_fraction},
            {"split_seed", pp.split_seed}}},
          {"train", to_json(c.train)},
          {"diagnostics",
           {{"ci_level", dg.ci_level},
            {"min_size", dg.min_size},
            {"n_clusters", dg.n_clusters},
            {"top_k", dg.top_k},
            {"interaction_predictors", dg.interaction_predictors}}},
          {"benchmarks",
           {{"enabled", bm.enabled},
            {"pca", bm.pca},
            {"plain_ae", bm.plain_ae},
            {"stepwise", bm.stepwise},
            {"screening_p", bm.screening_p},
            {"backward_threshold", bm.backward_threshold},
            {"forward_threshold", bm.forward_threshold}}},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir.generic_string()}};
}

RunConfig run_config_from_json(const Json& j) {
  check_keys(j, {"data", "preprocess", "train", "diagnostics", "benchmarks", "seeds", "output_dir"}, "");
  RunConfig c;
  if (j.contains("data")) {
    const Json& d = j.at("data");
    check_keys(d, {"csv", "outcome_column", "synthetic"}, "data");
    std::string csv;
    take(d, "csv", csv, "data");
    if (d.contains("csv")) c.data.csv = csv;
    take(d, "outcome_column", c.data.outcome_column, "data");
    if (d.contains("synthetic")) c.data.synthetic = synth_config_from_json(d.at("synthetic"));
  }
  if (j.contains("preprocess")) {
    const Json& p = j.at("preprocess");
    const std::string ctx = "preprocess";
    check_keys(p, {"enabled", "variance_threshold", "outlier_multiplier", "train_fraction", "split_seed"}, ctx);
    take(p, "enabled", c.preprocess.enabled, ctx);
    take(p, "variance_threshold", c.preprocess.variance_threshold, ctx);
    take(p, "outlier_multiplier", c.preprocess.outlier_multiplier, ctx);
    take(p, "train_fraction", c.preprocess.train_fraction, ctx);
    take(p, "split_seed", c.preprocess.split_seed, ctx);
  }
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("diagnostics")) {
    const Json& g = j.at("diagnostics");
    const std::string ctx = "diagnostics";
    check_keys(g, {"ci_level", "min_size", "n_clusters", "top_k", "interaction_predictors"}, ctx);
    take(g, "ci_level", c.diagnostics.ci_level, ctx);
    take(g, "min_size", c.diagnostics.min_size, ctx);
    take(g, "n_clusters", c.diagnostics.n_clusters, ctx);
    take(g, "top_k", c.diagnostics.top_k, ctx);
    take(g, "interaction_predictors", c.diagnostics.interaction_predictors, ctx);
  }
  if (j.contains("benchmarks")) {
    const Json& b = j.at("benchmarks");
    const std::string ctx = "benchmarks";
    check_keys(b, {"enabled", "pca", "plain_ae", "stepwise", "screening_p", "backward_threshold", "forward_threshold"},
               ctx);
    take(b, "enabled", c.benchmarks.enabled, ctx);
    take(b, "pca", c.benchmarks.pca, ctx);
    take(b, "plain_ae", c.benchmarks.plain_ae, ctx);
    take(b, "stepwise", c.benchmarks.stepwise, ctx);
    take(b, "screening_p", c.benchmarks.screening_p, ctx);
    take(b, "backward_threshold", c.benchmarks.backward_threshold, ctx);
    take(b, "forward_threshold", c.benchmarks.forward_threshold, ctx);
  }
  take(j, "seeds", c.seeds, "config");
  std::string out;
  take(j, "output_dir", out, "config");
  if (j.contains("output_dir")) c.output_dir = out;
  return c;
}

std::vector<fs::path> cmd_synth(const SynthConfig& config, const fs::path& out_dir) {
  config.validate();
  const SynthData data = generate_synthetic(config);
  const fs::path csv = out_dir / "synthetic.csv";
  const fs::path sidecar = out_dir / "synthetic_truth.json";
  write_synthetic(data, config, csv, sidecar);
  return {csv, sidecar};
}

void cmd_run(const RunConfig& config) {
  config.validate();
  prepare_output_dir(config.output_dir);
  OutputSet out(config.output_dir);

  Json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = to_json(config);
  manifest["timings_seconds"] = Json::object();
  Json notes = Json::array();
  std::string stage;
  auto clock_start = std::chrono::steady_clock::now();
  auto begin = [&](const std::string& name) {
    stage = name;
    clock_start = std::chrono::steady_clock::now();
  };
  auto end = [&]() {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - clock_start;
    manifest["timings_seconds"][stage] = dt.count();
  };
  auto finish = [&](const std::string& status) {
    manifest["status"] = status;
    manifest["notes"] = notes;
    manifest["files"] = out.inventory();
    write_json(config.output_dir / "manifest.json", manifest);
  };

  try {
    begin("load");
    RawTable table;
    if (config.data.synthetic) {
      const SynthConfig& sc = *config.data.synthetic;
      const SynthData sd = generate_synthetic(sc);
      write_synthetic(sd, sc, out.add("data/synthetic.csv"), out.add("data/synthetic_truth.json"));
      table = sd.table;
    } else {
      table = load_csv(*config.data.csv, config.data.outcome_column);
    }
    manifest["data"]["rows_loaded"] = table.rows();
    manifest["data"]["rows_dropped_by_loader"] = table.dropped_rows;
    end();

    begin("preprocess");
    if (config.preprocess.enabled) {
      const auto before_rows = table.rows();
      const auto before_cols = table.values.cols();
      table = preprocess(table, config.preprocess.variance_threshold, config.preprocess.outlier_multiplier);
      manifest["data"]["rows_removed_as_outliers"] = before_rows - table.rows();
      manifest["data"]["columns_removed_low_variance"] = before_cols - table.values.cols();
    }
    auto [train_set, test_set] =
        split_standardize(table, {config.preprocess.train_fraction, config.preprocess.split_seed});
    manifest["data"]["n_train"] = train_set.n();
    manifest["data"]["n_test"] = test_set.n();
    manifest["data"]["p"] = train_set.p();
    end();

    begin("train");
    SeedStudy study = seed_study(train_set, test_set, config.train, config.seeds);
    Json runs = Json::array();
    std::vector<std::size_t> ok;
    for (std::size_t r = 0; r < study.runs.size(); ++r) {
      const SeedRun& run = study.runs[r];
      Json rj = {{"seed", run.seed}};
      if (run.model) {
        ok.push_back(r);
        const std::string dir = seed_dir(run.seed);
        save_model(run.model->model, run.model->config, out.add(dir + "/model.json"));
        write_loss_history(run.model->loss_history, out.add(dir + "/loss_history.csv"));
        rj["status"] = "ok";
        rj["train_rec"] = run.train_rec;
        rj["test_rec"] = run.test_rec;
        rj["global_r2"] = run.global_r2;
      } else {
        rj["status"] = "failed";
        rj["error"] = run.error;
      }
      runs.push_back(rj);
    }
    manifest["runs"] = runs;
    if (!study.representative) throw RuntimeError("every seed run failed");
    const std::size_t rep = *study.representative;
    const SeedRun& rep_run = study.runs[rep];
    manifest["representative"] = {{"index", rep},
                                  {"seed", rep_run.seed},
                                  {"train_rec", rep_run.train_rec},
                                  {"test_rec", rep_run.test_rec},
                                  {"global_r2", rep_run.global_r2}};
    end();

    begin("diagnostics");
    const TrainedModel& model = *rep_run.model;
    const LocalFitBundle& bundle = model.final_bundle;
    const Eigen::MatrixXd& Z = bundle.Z;
    const auto& dg = config.diagnostics;
    const GlobalLatentModel global = fit_global(Z, train_set.y, dg.ci_level);
    const auto records = deviations(bundle.B, global);
    auto subgroups = form_subgroups(records, dg.min_size);

    const int n_clusters = static_cast<int>(std::min<Eigen::Index>(dg.n_clusters, train_set.p()));
    const ClusterAssignment clusters = hierarchical_cluster(train_set.X, n_clusters);

    std::vector<std::string> naming_notes;
    const auto named = name_latent_dims(Z, train_set.X, train_set.names, dg.top_k, &naming_notes);
    for (const auto& n : naming_notes) notes.push_back(n);

    std::vector<std::string> sub_notes;
    for (std::size_t s = 0; s < subgroups.size(); ++s) {
      auto& g = subgroups[s];
      const std::string label = "subgroup " + std::to_string(s + 1);
      g.zscore_profile = zscore_profile(train_set.X, g.members, clusters);
      if (static_cast<Eigen::Index>(g.members.size()) < train_set.n())
        g.rmse = rmse_contrast(Z, train_set.y, bundle.B, global, g.members);
      const auto predictors = top_abs(g.zscore_profile.predictor_means, dg.interaction_predictors);
      g.interaction_tests = checked_interactions(train_set.X, train_set.y, g.members, predictors, train_set.names,
                                                 sub_notes, label);
    }

    const TestProjection projection = project_test(model.model, config.train.kernel, train_set, test_set, global, subgroups);

    Json sub_json = Json::array();
    for (std::size_t s = 0; s < subgroups.size(); ++s) {
      const auto& g = subgroups[s];
      const std::string label = "subgroup " + std::to_string(s + 1);
      Json sj = subgroup_to_json(g);
      std::vector<Eigen::Index> test_members;
      for (std::size_t t = 0; t < projection.assignments.size(); ++t)
        if (std::find(projection.assignments[t].begin(), projection.assignments[t].end(), s) !=
            projection.assignments[t].end())
          test_members.push_back(static_cast<Eigen::Index>(t));
      sj["test_members"] = test_members;
      if (test_set.n() > 0) {
        Eigen::MatrixXd X_all(train_set.n() + test_set.n(), train_set.p());
        X_all << train_set.X, test_set.X;
        Eigen::VectorXd y_all(train_set.n() + test_set.n());
        y_all << train_set.y, test_set.y;
        std::vector<Eigen::Index> all_members = g.members;
        for (const auto t : test_members) all_members.push_back(train_set.n() + t);
        const auto predictors = top_abs(g.zscore_profile.predictor_means, dg.interaction_predictors);
        Json combined = Json::array();
        for (const auto& t : checked_interactions(X_all, y_all, all_members, predictors, train_set.names, sub_notes,
                                                  label + " (train+test)"))
          combined.push_back({{"predictor", t.predictor}, {"coefficient", t.coefficient}, {"p_value", t.p_value}});
        sj["interaction_tests_train_test"] = combined;
      }
      sub_json.push_back(sj);
    }
    for (const auto& n : sub_notes) notes.push_back(n);

    write_bundle(bundle, out.add("bundle.csv"));
    write_global_model(global, out.add("global_model.csv"));
    write_deviations(records, out.add("deviations.csv"));
    for (Eigen::Index k = 0; k < Z.cols(); ++k)
      write_plot_data(Z, train_set.y, records, k, out.add("plot/dim_" + std::to_string(k + 1) + ".csv"));
    write_latent_names(named, out.add("latent_names.csv"));
    write_clusters(clusters, train_set.names, out.add("clusters.csv"));
    write_json(out.add("subgroups.json"), {{"subgroups", sub_json},
                                           {"n_train", train_set.n()},
                                           {"n_test", test_set.n()},
                                           {"min_size", dg.min_size}});
    if (test_set.n() > 0) write_deviations(projection.records, out.add("test_deviations.csv"));

    if (ok.size() >= 2) {
      std::vector<RunDeviations> devs;
      std::vector<std::uint64_t> seeds;
      std::size_t reference = 0;
      for (const auto r : ok) {
        const TrainedModel& m = *study.runs[r].model;
        const GlobalLatentModel g = fit_global(m.final_bundle.Z, train_set.y, dg.ci_level);
        if (r == rep) reference = devs.size();
        devs.push_back({m.final_bundle.Z, deviation_matrix(m.final_bundle.B, g)});
        seeds.push_back(study.runs[r].seed);
      }
      const StabilityTable table_sd = rank_stability(devs, reference);
      write_stability(table_sd, seeds, out.add("stability.csv"), out.add("stability_alignment.csv"));
    }
    end();

    if (config.benchmarks.enabled) {
      begin("benchmarks");
      const auto& bm = config.benchmarks;
      std::ostringstream table_csv;
      table_csv << "method,seed,r_squared\n";
      for (const auto r : ok)
        table_csv << "proposed," << study.runs[r].seed << ',' << format_number(study.runs[r].global_r2) << '\n';
      if (bm.plain_ae) {
        for (const auto r : ok) {
          TrainConfig cfg = config.train;
          cfg.seed = study.runs[r].seed;
          const BenchmarkResult b = plain_ae_baseline(train_set, cfg);
          table_csv << "plain_ae," << cfg.seed << ',' << format_number(b.r_squared) << '\n';
        }
      }
      if (bm.pca) {
        const BenchmarkResult b = pca_baseline(train_set, config.train.d);
        table_csv << "pca,," << format_number(b.r_squared) << '\n';
      }
      write_text(out.add("benchmarks/benchmarks.csv"), table_csv.str());
      if (bm.stepwise) {
        for (const double p : bm.screening_p) {
          const StepwiseModel sw =
              stepwise(train_set.X, train_set.y, train_set.names, {p, bm.backward_threshold, bm.forward_threshold});
          const std::string tag = threshold_tag(p);
          write_stepwise_report(sw, out.add("benchmarks/stepwise_p" + tag + ".csv"));
          std::ostringstream trace;
          trace << "action,term,aic_before,aic_after\n";
          for (const auto& t : sw.trace)
            trace << t.action << ',' << t.term << ',' << format_number(t.aic_before) << ','
                  << format_number(t.aic_after) << '\n';
          write_text(out.add("benchmarks/stepwise_trace_p" + tag + ".csv"), trace.str());
          for (const auto& n : sw.notes) notes.push_back("stepwise p<" + format_number(p) + ": " + n);
        }
      }
      end();
    }
  } catch (const std::exception& e) {
    end();
    manifest["failed_stage"] = stage;
    manifest["error"] = e.what();
    finish("failed");
    throw;
  }
  finish("complete");
}

Json cmd_report(const fs::path& run_dir) {
  const fs::path manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw ConfigError("missing inputs: manifest.json");
  const Json manifest = read_json(manifest_path);
  if (manifest.value("status", "") != "complete")
    throw RuntimeError("run did not complete (failed stage: " + manifest.value("failed_stage", std::string("?")) + ")");

  const RunConfig config = run_config_from_json(manifest.at("config"));
  std::size_t ok_runs = 0;
  for (const auto& r : manifest.at("runs"))
    if (r.value("status", "") == "ok") ++ok_runs;

  std::vector<std::string> required{"global_model.csv", "subgroups.json"};
  if (config.benchmarks.enabled) required.push_back("benchmarks/benchmarks.csv");
  if (ok_runs >= 2) required.push_back("stability.csv");
  std::vector<std::string> missing;
  for (const auto& f : required)
    if (!fs::exists(run_dir / f)) missing.push_back(f);
  if (!missing.empty()) {
    std::string msg = "missing inputs:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }

  Json summary;
  summary["version"] = manifest.at("version");
  summary["representative"] = manifest.at("representative");

  Json terms = Json::array();
  double r2 = std::nan("");
  const auto rows = read_csv_rows(run_dir / "global_model.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.at(0) == "R2") {
      r2 = to_double(r.at(1));
      continue;
    }
    if (r.size() < 7) throw RuntimeError("global_model.csv: malformed row");
    terms.push_back({{"term", r[0]},
                     {"coefficient", to_double(r[1])},
                     {"std_error", to_double(r[2])},
                     {"t", to_double(r[3])},
                     {"p_value", to_double(r[4])},
                     {"ci_lower", to_double(r[5])},
                     {"ci_upper", to_double(r[6])}});
  }
  summary["global_model"] = {{"terms", terms}, {"r_squared", r2}};

  const Json subs = read_json(run_dir / "subgroups.json");
  Json sub_list = Json::array();
  for (std::size_t s = 0; s < subs.at("subgroups").size(); ++s) {
    const Json& g = subs.at("subgroups")[s];
    sub_list.push_back({{"index", s + 1},
                        {"size", g.at("size")},
                        {"dim", g.at("dim")},
                        {"direction", g.at("direction")},
                        {"rmse", g.at("rmse")},
                        {"test_members", g.value("test_members", Json::array()).size()}});
  }
  summary["subgroups"] = sub_list;

  Json bench = Json::array();
  if (config.benchmarks.enabled) {
    std::map<std::string, std::vector<double>> by_method;
    const auto brows = read_csv_rows(run_dir / "benchmarks/benchmarks.csv");
    for (std::size_t i = 1; i < brows.size(); ++i) by_method[brows[i].at(0)].push_back(to_double(brows[i].at(2)));
    for (const char* method : {"proposed", "plain_ae", "pca"}) {
      const auto it = by_method.find(method);
      if (it == by_method.end()) continue;
      const auto& v = it->second;
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (const double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      bench.push_back({{"method", method}, {"mean_r_squared", mean}, {"sd_r_squared", sd}, {"runs", v.size()}});
    }
  }
  summary["benchmarks"] = bench;

  if (ok_runs >= 2) {
    const auto srows = read_csv_rows(run_dir / "stability.csv");
    std::vector<double> means;
    for (const auto& r : srows)
      if (!r.empty() && r[0] == "mean")
        for (std::size_t k = 1; k < r.size(); ++k) means.push_back(to_double(r[k]));
    summary["stability"] = {{"mean_rank_sd", means}, {"runs", ok_runs}};
  } else {
    summary["stability"] = nullptr;
  }
  return summary;
}

}  // namespace latentreg
