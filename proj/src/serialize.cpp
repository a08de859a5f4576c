#include "latentreg/serialize.hpp"

#include "latentreg/error.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace latentreg {

namespace {

namespace fs = std::filesystem;

std::string num(double v) { return format_number(v); }

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += cells[k];
  }
  return out;
}

// Names with a comma or quote are quoted CSV-style.
std::string cell(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + ctx + "." + item.key() + "'");
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

const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "linear"; }

Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "linear") return Activation::Linear;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

Json to_json(const KernelConfig& k) {
  return {{"sigma", k.sigma}, {"k_fraction", k.k_fraction}, {"ridge_eps", k.ridge_eps}, {"rss_floor", k.rss_floor}};
}

Json to_json(const TrainConfig& c) {
  return {{"lambda_rec", c.lambda_rec}, {"lambda_pred", c.lambda_pred}, {"lambda_reg", c.lambda_reg},
          {"epochs", c.epochs},         {"lr", c.lr},                   {"batches", c.batches},
          {"d", c.d},                   {"kernel", to_json(c.kernel)},  {"seed", c.seed}};
}

Json to_json(const SynthConfig& c) {
  Json groups = Json::array();
  for (const auto& g : c.subgroups)
    groups.push_back({{"size", g.size}, {"affected_factor", g.affected_factor}, {"slope_delta", g.slope_delta}});
  return {{"n", c.n},
          {"p", c.p},
          {"d_true", c.d_true},
          {"noise_sd", c.noise_sd},
          {"outcome_noise_sd", c.outcome_noise_sd},
          {"factor_strength", c.factor_strength},
          {"outcome_coefficients", c.outcome_coefficients},
          {"subgroups", groups},
          {"seed", c.seed}};
}

KernelConfig kernel_from_json(const Json& j) {
  const std::string ctx = "kernel";
  check_keys(j, {"sigma", "k_fraction", "ridge_eps", "rss_floor"}, ctx);
  KernelConfig k;
  take(j, "sigma", k.sigma, ctx);
  take(j, "k_fraction", k.k_fraction, ctx);
  take(j, "ridge_eps", k.ridge_eps, ctx);
  take(j, "rss_floor", k.rss_floor, ctx);
  return k;
}

TrainConfig train_config_from_json(const Json& j) {
  const std::string ctx = "train";
  check_keys(j, {"lambda_rec", "lambda_pred", "lambda_reg", "epochs", "lr", "batches", "d", "kernel", "seed"}, ctx);
  TrainConfig c;
  take(j, "lambda_rec", c.lambda_rec, ctx);
  take(j, "lambda_pred", c.lambda_pred, ctx);
  take(j, "lambda_reg", c.lambda_reg, ctx);
  take(j, "epochs", c.epochs, ctx);
  take(j, "lr", c.lr, ctx);
  take(j, "batches", c.batches, ctx);
  take(j, "d", c.d, ctx);
  take(j, "seed", c.seed, ctx);
  if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
  return c;
}

SynthConfig synth_config_from_json(const Json& j) {
  const std::string ctx = "synthetic";
  check_keys(j,
             {"n", "p", "d_true", "noise_sd", "outcome_noise_sd", "factor_strength", "outcome_coefficients",
              "subgroups", "seed"},
             ctx);
  SynthConfig c;
  take(j, "n", c.n, ctx);
  take(j, "p", c.p, ctx);
  take(j, "d_true", c.d_true, ctx);
  take(j, "noise_sd", c.noise_sd, ctx);
  take(j, "outcome_noise_sd", c.outcome_noise_sd, ctx);
  take(j, "factor_strength", c.factor_strength, ctx);
  take(j, "outcome_coefficients", c.outcome_coefficients, ctx);
  take(j, "seed", c.seed, ctx);
  if (j.contains("subgroups")) {
    if (!j.at("subgroups").is_array()) throw ConfigError("synthetic.subgroups must be an array");
    for (const auto& g : j.at("subgroups")) {
      const std::string gctx = "synthetic.subgroups[]";
      check_keys(g, {"size", "affected_factor", "slope_delta"}, gctx);
      PlantedSubgroup s;
      take(g, "size", s.size, gctx);
      take(g, "affected_factor", s.affected_factor, gctx);
      take(g, "slope_delta", s.slope_delta, gctx);
      c.subgroups.push_back(s);
    }
  }
  return c;
}

Json params_to_json(const MlpParams& params) {
  Json layers = Json::array();
  for (const auto& layer : params.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    layers.push_back({{"in_dim", layer.weight.cols()},
                      {"out_dim", layer.weight.rows()},
                      {"activation", activation_name(layer.activation)},
                      {"weight", w},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  return layers;
}

MlpParams params_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("model: layer list must be a non-empty array");
  MlpParams p;
  for (const auto& lj : j) {
    check_keys(lj, {"in_dim", "out_dim", "activation", "weight", "bias"}, "model.layer");
    Eigen::Index in = 0, out = 0;
    std::string act;
    std::vector<double> w, b;
    take(lj, "in_dim", in, "model.layer");
    take(lj, "out_dim", out, "model.layer");
    take(lj, "activation", act, "model.layer");
    take(lj, "weight", w, "model.layer");
    take(lj, "bias", b, "model.layer");
    if (in < 1 || out < 1 || static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
      throw ConfigError("model: layer shape does not match its weights");
    Layer layer;
    layer.activation = activation_from(act);
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    p.layers.push_back(std::move(layer));
  }
  validate_specs(p.specs());
  return p;
}

Json model_to_json(const Autoencoder& model, const TrainConfig& config) {
  return {{"encoder", params_to_json(model.encoder)},
          {"decoder", params_to_json(model.decoder)},
          {"seed", config.seed},
          {"train", to_json(config)}};
}

void save_model(const Autoencoder& model, const TrainConfig& config, const fs::path& path) {
  write_json(path, model_to_json(model, config));
}

Autoencoder load_model(const fs::path& path, TrainConfig* config) {
  const Json j = read_json(path);
  check_keys(j, {"encoder", "decoder", "seed", "train"}, "model");
  if (!j.contains("encoder") || !j.contains("decoder")) throw ConfigError("model: encoder or decoder missing");
  Autoencoder m{params_from_json(j.at("encoder")), params_from_json(j.at("decoder"))};
  if (m.encoder.output_dim() != m.decoder.input_dim() || m.decoder.output_dim() != m.encoder.input_dim())
    throw ConfigError("model: encoder and decoder shapes disagree");
  if (config && j.contains("train")) *config = train_config_from_json(j.at("train"));
  return m;
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << content;
  if (!out) throw RuntimeError("write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_loss_history(const std::vector<LossComponents>& history, const fs::path& path) {
  std::ostringstream out;
  out << "epoch,rec,pred,reg,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& c = history[e];
    out << join({std::to_string(e + 1), num(c.rec), num(c.pred), num(c.reg), num(c.total)}) << '\n';
  }
  write_text(path, out.str());
}

void write_bundle(const LocalFitBundle& b, const fs::path& path) {
  const auto d = b.Z.cols();
  std::vector<std::string> header{"patient"};
  for (Eigen::Index k = 0; k < d; ++k) header.push_back("z" + std::to_string(k + 1));
  header.push_back("b0");
  for (Eigen::Index k = 0; k < d; ++k) header.push_back("b" + std::to_string(k + 1));
  header.insert(header.end(), {"bandwidth", "null_intercept", "llr"});
  std::ostringstream out;
  out << join(header) << '\n';
  for (Eigen::Index i = 0; i < b.Z.rows(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(num(b.Z(i, k)));
    for (Eigen::Index k = 0; k <= d; ++k) row.push_back(num(b.B(i, k)));
    row.insert(row.end(), {num(b.bandwidths(i)), num(b.null_intercepts(i)), num(b.llr(i))});
    out << join(row) << '\n';
  }
  write_text(path, out.str());
}

void write_synthetic(const SynthData& data, const SynthConfig& config, const fs::path& csv_path,
                     const fs::path& sidecar_path) {
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  write_csv(data.table, csv_path);
  Json members = Json::array();
  for (std::size_t g = 0; g < config.subgroups.size(); ++g) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < data.table.truth_labels.size(); ++r)
      if (data.table.truth_labels[r] == static_cast<int>(g + 1)) idx.push_back(r);
    members.push_back(idx);
  }
  write_json(sidecar_path, {{"seed", config.seed},
                            {"config", to_json(config)},
                            {"outcome_column", data.table.outcome_column},
                            {"subgroup_members", members},
                            {"block_of_predictor", data.block_of_predictor},
                            {"outcome_coefficients", std::vector<double>(data.outcome_coefficients.data(),
                                                                         data.outcome_coefficients.data() +
                                                                             data.outcome_coefficients.size())}});
}

void write_global_model(const GlobalLatentModel& g, const fs::path& path) {
  const auto& o = g.ols;
  std::ostringstream out;
  out << "Term,Coefficient,Std. Error,t,P>|t|,CI Lower,CI Upper\n";
  for (Eigen::Index k = 0; k < o.coefficients.size(); ++k) {
    const std::string term = k == 0 ? "Intercept" : cell(g.latent_names[static_cast<std::size_t>(k - 1)]);
    out << join({term, num(o.coefficients(k)), num(o.standard_errors(k)), num(o.t_values(k)), num(o.p_values(k)),
                 num(o.ci_lower(k)), num(o.ci_upper(k))})
        << '\n';
  }
  out << "R2," << num(o.r_squared) << ",,,,,\n";
  write_text(path, out.str());
}

void write_deviations(const std::vector<DeviationRecord>& records, const fs::path& path) {
  std::ostringstream out;
  out << "patient,dim,delta,flagged,direction\n";
  for (const auto& r : records)
    out << join({std::to_string(r.patient), std::to_string(r.dim + 1), num(r.delta), r.flagged ? "1" : "0",
                 std::to_string(r.direction)})
        << '\n';
  write_text(path, out.str());
}

void write_plot_data(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                     const std::vector<DeviationRecord>& records, Eigen::Index dim, const fs::path& path) {
  std::ostringstream out;
  out << "patient,latent,outcome,delta,flagged\n";
  for (const auto& r : records) {
    if (r.dim != dim) continue;
    out << join({std::to_string(r.patient), num(Z(r.patient, dim)), num(y(r.patient)), num(r.delta),
                 r.flagged ? "1" : "0"})
        << '\n';
  }
  write_text(path, out.str());
}

void write_latent_names(const std::vector<std::vector<NamedVariable>>& named, const fs::path& path) {
  std::ostringstream out;
  out << "dim,rank,variable,t,label\n";
  for (std::size_t k = 0; k < named.size(); ++k)
    for (std::size_t r = 0; r < named[k].size(); ++r)
      out << join({std::to_string(k + 1), std::to_string(r + 1), cell(named[k][r].name),
                   num(named[k][r].t_statistic), cell(named[k][r].label())})
          << '\n';
  write_text(path, out.str());
}

void write_clusters(const ClusterAssignment& clusters, const std::vector<std::string>& names, const fs::path& path) {
  std::ostringstream out;
  out << "variable,cluster\n";
  for (std::size_t j = 0; j < names.size(); ++j)
    out << cell(names[j]) << ',' << (clusters.labels[j] + 1) << '\n';
  write_text(path, out.str());
}

void write_stability(const StabilityTable& t, const std::vector<std::uint64_t>& seeds, const fs::path& path,
                     const fs::path& alignment_path) {
  const auto d = t.rank_sd.cols();
  std::vector<std::string> header{"patient"};
  for (Eigen::Index k = 0; k < d; ++k) header.push_back("rank_sd_dim" + std::to_string(k + 1));
  std::ostringstream out;
  out << join(header) << '\n';
  for (Eigen::Index i = 0; i < t.rank_sd.rows(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(num(t.rank_sd(i, k)));
    out << join(row) << '\n';
  }
  std::vector<std::string> mean{"mean"};
  for (Eigen::Index k = 0; k < d; ++k) mean.push_back(num(t.mean_rank_sd(k)));
  out << join(mean) << '\n';
  write_text(path, out.str());

  std::ostringstream al;
  al << "seed,reference_dim,run_dim,sign,correlation,unstable\n";
  for (std::size_t r = 0; r < t.alignments.size(); ++r) {
    const auto& a = t.alignments[r];
    for (std::size_t ref = 0; ref < a.sign.size(); ++ref) {
      std::size_t run_dim = 0;
      for (std::size_t q = 0; q < a.reference_dim_of.size(); ++q)
        if (a.reference_dim_of[q] == static_cast<Eigen::Index>(ref)) run_dim = q;
      al << join({std::to_string(seeds[r]), std::to_string(ref + 1), std::to_string(run_dim + 1),
                  std::to_string(a.sign[ref]), num(a.correlation[ref]), a.unstable[ref] ? "1" : "0"})
         << '\n';
    }
  }
  write_text(alignment_path, al.str());
}

void write_stepwise_report(const StepwiseModel& m, const fs::path& path) {
  const auto& o = m.final_ols;
  std::ostringstream out;
  out << "# screening_p=" << num(m.options.screening_p) << " r_squared=" << num(o.r_squared)
      << " backward_threshold=" << num(m.options.backward_threshold)
      << " forward_threshold=" << num(m.options.forward_threshold) << '\n';
  out << "Variable,Coef.,Std. Err.,t,P>|t|,[0.025,0.975]\n";
  for (Eigen::Index k = 0; k < o.coefficients.size(); ++k) {
    const std::string term = k == 0 ? "Intercept" : cell(m.term_names[static_cast<std::size_t>(k - 1)]);
    out << join({term, num(o.coefficients(k)), num(o.standard_errors(k)), num(o.t_values(k)), num(o.p_values(k)),
                 num(o.ci_lower(k)), num(o.ci_upper(k))})
        << '\n';
  }
  write_text(path, out.str());
}

Json subgroup_to_json(const SubgroupReport& s) {
  Json tests = Json::array();
  for (const auto& t : s.interaction_tests)
    tests.push_back({{"predictor", t.predictor}, {"coefficient", t.coefficient}, {"p_value", t.p_value}});
  const auto& zp = s.zscore_profile;
  return {{"size", s.members.size()},
          {"members", s.members},
          {"dim", s.dim + 1},
          {"direction", s.direction},
          {"overlap", s.overlap},
          {"zscore_cluster_means",
           std::vector<double>(zp.cluster_means.data(), zp.cluster_means.data() + zp.cluster_means.size())},
          {"zscore_predictor_means",
           std::vector<double>(zp.predictor_means.data(), zp.predictor_means.data() + zp.predictor_means.size())},
          {"rmse",
           {{"global_in", s.rmse.global_in},
            {"local_in", s.rmse.local_in},
            {"global_out", s.rmse.global_out},
            {"local_out", s.rmse.local_out},
            {"improvement_in", s.rmse.improvement_in()},
            {"improvement_out", s.rmse.improvement_out()}}},
          {"interaction_tests", tests}};
}

}  // namespace latentreg
