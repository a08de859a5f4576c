#include "latentreg/diagnostics.hpp"

#include "latentreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

namespace latentreg {

namespace {

double rmse_over(const Eigen::VectorXd& resid, const std::vector<bool>& in_set, bool want) {
  double acc = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < resid.size(); ++i) {
    if (in_set[static_cast<std::size_t>(i)] != want) continue;
    acc += resid(i) * resid(i);
    ++count;
  }
  return std::sqrt(acc / static_cast<double>(count));
}

std::vector<bool> membership(Eigen::Index n, const std::vector<Eigen::Index>& members) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (auto m : members) {
    if (m < 0 || m >= n) throw ConfigError("member index out of range");
    in[static_cast<std::size_t>(m)] = true;
  }
  return in;
}

double safe_corr(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  try {
    return pearson_corr(a, b);
  } catch (const ConfigError&) {
    return 0.0;
  }
}

}  // namespace

std::string NamedVariable::label() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), " (t=%.2f)", t_statistic);
  return name + buf;
}

GlobalLatentModel fit_global(const Eigen::Ref<const Eigen::MatrixXd>& Z_train, const Eigen::Ref<const Eigen::VectorXd>& y_train,
                             double ci_level, std::vector<std::string> latent_names) {
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
  GlobalLatentModel g;
  g.ols = ols_fit(Z_train, y_train, 1.0 - ci_level);
  if (latent_names.empty())
    for (Eigen::Index k = 0; k < Z_train.cols(); ++k) latent_names.push_back("latent" + std::to_string(k + 1));
  if (static_cast<Eigen::Index>(latent_names.size()) != Z_train.cols())
    throw ConfigError("fit_global: one name per latent dimension required");
  g.latent_names = std::move(latent_names);
  return g;
}

Eigen::MatrixXd deviation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& B, const GlobalLatentModel& global) {
  const auto d = global.latent_dim();
  if (B.cols() != d + 1) throw ConfigError("deviations: local and global models differ in latent dimension");
  return B.rightCols(d).rowwise() - global.ols.coefficients.tail(d).transpose();
}

std::vector<DeviationRecord> deviations(const Eigen::Ref<const Eigen::MatrixXd>& B, const GlobalLatentModel& global) {
  const Eigen::MatrixXd delta = deviation_matrix(B, global);
  std::vector<DeviationRecord> out;
  out.reserve(static_cast<std::size_t>(delta.size()));
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (Eigen::Index k = 0; k < delta.cols(); ++k) {
      const double local = B(i, k + 1);
      DeviationRecord r;
      r.patient = i;
      r.dim = k;
      r.delta = delta(i, k);
      r.flagged = local < global.ols.ci_lower(k + 1) || local > global.ols.ci_upper(k + 1);
      r.direction = r.flagged ? (r.delta > 0.0 ? 1 : -1) : 0;
      out.push_back(r);
    }
  return out;
}

std::vector<SubgroupReport> form_subgroups(const std::vector<DeviationRecord>& records, std::size_t min_size) {
  std::map<std::pair<Eigen::Index, int>, std::vector<Eigen::Index>> groups;
  for (const auto& r : records)
    if (r.flagged) groups[{r.dim, r.direction}].push_back(r.patient);

  std::vector<SubgroupReport> out;
  for (auto& [key, members] : groups) {
    if (members.size() < std::max<std::size_t>(min_size, 1)) continue;
    std::sort(members.begin(), members.end());
    SubgroupReport s;
    s.dim = key.first;
    s.direction = key.second;
    s.members = std::move(members);
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const SubgroupReport& a, const SubgroupReport& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.direction > b.direction;
  });
  for (std::size_t g = 0; g < out.size(); ++g) {
    std::set<Eigen::Index> others;
    for (std::size_t h = 0; h < out.size(); ++h)
      if (h != g) others.insert(out[h].members.begin(), out[h].members.end());
    for (auto m : out[g].members)
      if (others.count(m)) out[g].overlap.push_back(m);
  }
  return out;
}

ClusterProfile zscore_profile(const Eigen::Ref<const Eigen::MatrixXd>& X_std, const std::vector<Eigen::Index>& members,
                              const ClusterAssignment& clusters) {
  if (members.empty()) throw ConfigError("zscore_profile: empty member set");
  if (static_cast<Eigen::Index>(clusters.labels.size()) != X_std.cols())
    throw ConfigError("zscore_profile: cluster labels do not match predictors");
  ClusterProfile prof;
  prof.predictor_means = Eigen::VectorXd::Zero(X_std.cols());
  for (auto m : members) {
    if (m < 0 || m >= X_std.rows()) throw ConfigError("zscore_profile: member index out of range");
    prof.predictor_means += X_std.row(m).transpose();
  }
  prof.predictor_means /= static_cast<double>(members.size());
  prof.cluster_means = Eigen::VectorXd::Zero(clusters.n_clusters);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(clusters.n_clusters);
  for (Eigen::Index j = 0; j < X_std.cols(); ++j) {
    const int c = clusters.labels[static_cast<std::size_t>(j)];
    prof.cluster_means(c) += prof.predictor_means(j);
    counts(c) += 1.0;
  }
  prof.cluster_means = prof.cluster_means.cwiseQuotient(counts.cwiseMax(1.0));
  return prof;
}

std::vector<std::vector<NamedVariable>> name_latent_dims(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                                         const Eigen::Ref<const Eigen::MatrixXd>& X_std,
                                                         const std::vector<std::string>& names, std::size_t top_k,
                                                         std::vector<std::string>* notes) {
  const auto n = Z.rows();
  if (n < 4) throw ConfigError("name_latent_dims: need at least 4 patients");
  if (X_std.rows() != n || static_cast<Eigen::Index>(names.size()) != X_std.cols())
    throw ConfigError("name_latent_dims: shape mismatch");

  std::vector<bool> constant(static_cast<std::size_t>(X_std.cols()));
  for (Eigen::Index j = 0; j < X_std.cols(); ++j) {
    constant[static_cast<std::size_t>(j)] = (X_std.col(j).array() == X_std(0, j)).all();
    if (constant[static_cast<std::size_t>(j)] && notes) notes->push_back("skipped constant variable " + names[static_cast<std::size_t>(j)]);
  }

  std::vector<std::vector<NamedVariable>> out;
  for (Eigen::Index k = 0; k < Z.cols(); ++k) {
    std::vector<double> col(Z.col(k).data(), Z.col(k).data() + n);
    const double median = quantile_linear(col, 0.5);
    std::vector<Eigen::Index> above, below;
    for (Eigen::Index i = 0; i < n; ++i) (Z(i, k) > median ? above : below).push_back(i);
    if (above.size() < 2 || below.size() < 2) throw RuntimeError("name_latent_dims: degenerate median split on latent " + std::to_string(k + 1));

    std::vector<std::pair<Eigen::Index, double>> scored;
    Eigen::VectorXd a(static_cast<Eigen::Index>(above.size())), b(static_cast<Eigen::Index>(below.size()));
    for (Eigen::Index j = 0; j < X_std.cols(); ++j) {
      if (constant[static_cast<std::size_t>(j)]) continue;
      for (std::size_t i = 0; i < above.size(); ++i) a(static_cast<Eigen::Index>(i)) = X_std(above[i], j);
      for (std::size_t i = 0; i < below.size(); ++i) b(static_cast<Eigen::Index>(i)) = X_std(below[i], j);
      scored.emplace_back(j, welch_t_test(a, b).t_statistic);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& x, const auto& y) { return std::fabs(x.second) > std::fabs(y.second); });
    std::vector<NamedVariable> top;
    for (std::size_t r = 0; r < std::min(top_k, scored.size()); ++r)
      top.push_back({names[static_cast<std::size_t>(scored[r].first)], scored[r].second});
    out.push_back(std::move(top));
  }
  return out;
}

RmseContrast rmse_contrast(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::MatrixXd>& B, const GlobalLatentModel& global,
                           const std::vector<Eigen::Index>& members) {
  const auto n = Z.rows();
  if (y.size() != n || B.rows() != n || B.cols() != Z.cols() + 1) throw ConfigError("rmse_contrast: shape mismatch");
  const auto in = membership(n, members);
  const auto count_in = std::count(in.begin(), in.end(), true);
  if (count_in == 0 || count_in == n) throw ConfigError("rmse_contrast: members and complement must be nonempty");

  const auto& beta = global.ols.coefficients;
  Eigen::VectorXd r_global(n), r_local(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r_global(i) = y(i) - (beta(0) + Z.row(i).dot(beta.tail(Z.cols())));
    r_local(i) = y(i) - (B(i, 0) + Z.row(i).dot(B.row(i).tail(Z.cols())));
  }
  return {rmse_over(r_global, in, true), rmse_over(r_local, in, true), rmse_over(r_global, in, false),
          rmse_over(r_local, in, false)};
}

std::vector<InteractionTest> interaction_check(const Eigen::Ref<const Eigen::MatrixXd>& X_std,
                                               const Eigen::Ref<const Eigen::VectorXd>& y,
                                               const std::vector<Eigen::Index>& members,
                                               const std::vector<Eigen::Index>& predictors,
                                               const std::vector<std::string>& names) {
  const auto n = X_std.rows();
  const auto in = membership(n, members);
  const auto count_in = std::count(in.begin(), in.end(), true);
  if (count_in < 2 || n - count_in < 2) throw ConfigError("interaction_check: need at least 2 members and 2 non-members");

  std::vector<InteractionTest> out;
  Eigen::MatrixXd design(n, 3);
  for (auto j : predictors) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = in[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      design(i, 0) = X_std(i, j);
      design(i, 1) = g;
      design(i, 2) = X_std(i, j) * g;
    }
    const std::string& name = names[static_cast<std::size_t>(j)];
    OlsResult fit;
    try {
      fit = ols_fit(design, y);
    } catch (const RuntimeError&) {
      throw RuntimeError("interaction_check: collinear design for predictor " + name);
    }
    out.push_back({name, fit.coefficients(3), fit.p_values(3)});
  }
  return out;
}

TestProjection project_test(const Autoencoder& model, const KernelConfig& kernel, const Dataset& train,
                            const Dataset& test, const GlobalLatentModel& global,
                            const std::vector<SubgroupReport>& subgroups) {
  TestProjection out;
  const Eigen::Index d = model.latent_dim();
  if (test.n() == 0) {
    out.Z.resize(0, d);
    out.B.resize(0, d + 1);
    return out;
  }
  const Eigen::MatrixXd Z_train = model.encode(train.X);
  out.Z = model.encode(test.X);
  out.B = fit_query_models(Z_train, train.y, out.Z, kernel).B;
  out.records = deviations(out.B, global);
  out.assignments.resize(static_cast<std::size_t>(test.n()));
  for (const auto& r : out.records) {
    if (!r.flagged) continue;
    for (std::size_t s = 0; s < subgroups.size(); ++s)
      if (subgroups[s].dim == r.dim && subgroups[s].direction == r.direction)
        out.assignments[static_cast<std::size_t>(r.patient)].push_back(s);
  }
  for (auto& a : out.assignments) std::sort(a.begin(), a.end());
  return out;
}

DimAlignment align_dims(const Eigen::Ref<const Eigen::MatrixXd>& Z_ref, const Eigen::Ref<const Eigen::MatrixXd>& Z_run) {
  const auto d = Z_ref.cols();
  if (Z_run.cols() != d || Z_run.rows() != Z_ref.rows()) throw ConfigError("align_dims: runs differ in shape");
  Eigen::MatrixXd C(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index k = 0; k < d; ++k) C(r, k) = safe_corr(Z_ref.col(r), Z_run.col(k));

  DimAlignment a;
  a.reference_dim_of.assign(static_cast<std::size_t>(d), -1);
  a.sign.assign(static_cast<std::size_t>(d), 1);
  a.correlation.assign(static_cast<std::size_t>(d), 0.0);
  a.unstable.assign(static_cast<std::size_t>(d), false);
  std::vector<bool> ref_used(static_cast<std::size_t>(d), false), run_used(static_cast<std::size_t>(d), false);
  for (Eigen::Index step = 0; step < d; ++step) {
    Eigen::Index br = -1, bk = -1;
    double best = -1.0;
    for (Eigen::Index r = 0; r < d; ++r) {
      if (ref_used[static_cast<std::size_t>(r)]) continue;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (run_used[static_cast<std::size_t>(k)]) continue;
        if (std::fabs(C(r, k)) > best) {
          best = std::fabs(C(r, k));
          br = r;
          bk = k;
        }
      }
    }
    ref_used[static_cast<std::size_t>(br)] = run_used[static_cast<std::size_t>(bk)] = true;
    a.reference_dim_of[static_cast<std::size_t>(bk)] = br;
    a.sign[static_cast<std::size_t>(br)] = C(br, bk) < 0.0 ? -1 : 1;
    a.correlation[static_cast<std::size_t>(br)] = best;
    a.unstable[static_cast<std::size_t>(br)] = best < 0.2;
  }
  return a;
}

std::vector<Eigen::Index> deviation_ranks(const Eigen::Ref<const Eigen::VectorXd>& delta) {
  const auto n = delta.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::fabs(delta(a)) > std::fabs(delta(b)); });
  std::vector<Eigen::Index> rank(static_cast<std::size_t>(n));
  for (Eigen::Index pos = 0; pos < n; ++pos) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos + 1;
  return rank;
}

StabilityTable rank_stability(const std::vector<RunDeviations>& runs, std::size_t reference) {
  if (runs.size() < 2) throw ConfigError("rank_stability: need at least 2 runs");
  if (reference >= runs.size()) throw ConfigError("rank_stability: reference run out of range");
  const auto n = runs[reference].Z.rows();
  const auto d = runs[reference].Z.cols();
  for (const auto& r : runs)
    if (r.Z.rows() != n || r.Z.cols() != d || r.delta.rows() != n || r.delta.cols() != d)
      throw ConfigError("rank_stability: runs differ in shape");

  StabilityTable t;
  for (const auto& r : runs) t.alignments.push_back(align_dims(runs[reference].Z, r.Z));

  const double m = static_cast<double>(runs.size());
  t.rank_sd = Eigen::MatrixXd::Zero(n, d);
  for (Eigen::Index ref_dim = 0; ref_dim < d; ++ref_dim) {
    Eigen::MatrixXd ranks(n, static_cast<Eigen::Index>(runs.size()));
    for (std::size_t run = 0; run < runs.size(); ++run) {
      const auto& map = t.alignments[run].reference_dim_of;
      const auto k = static_cast<Eigen::Index>(std::find(map.begin(), map.end(), ref_dim) - map.begin());
      const auto rk = deviation_ranks(runs[run].delta.col(k));
      for (Eigen::Index i = 0; i < n; ++i) ranks(i, static_cast<Eigen::Index>(run)) = static_cast<double>(rk[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mean = ranks.row(i).sum() / m;
      t.rank_sd(i, ref_dim) = std::sqrt((ranks.row(i).array() - mean).square().sum() / m);
    }
  }
  t.mean_rank_sd = t.rank_sd.colwise().mean().transpose();
  return t;
}

}  // namespace latentreg
