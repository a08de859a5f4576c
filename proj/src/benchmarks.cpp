#include "latentreg/benchmarks.hpp"

#include "latentreg/error.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace latentreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd select_columns(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
  return out;
}

std::string pair_name(const InteractionPair& pr, const std::vector<std::string>& names) {
  return names[static_cast<std::size_t>(pr.first)] + ":" + names[static_cast<std::size_t>(pr.second)];
}

// AIC of y on [1, D]; +inf when the design is rank deficient or leaves no residual df.
double design_aic(const Eigen::MatrixXd& D, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const auto n = D.rows();
  const auto q = D.cols();
  if (n <= q + 1) return kInf;
  Eigen::MatrixXd A(n, q + 1);
  A.col(0).setOnes();
  A.rightCols(q) = D;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < q + 1) return kInf;
  const double rss = (y - A * qr.solve(y)).squaredNorm();
  return gaussian_aic(rss, n, q + 1);
}

}  // namespace

std::string method_name(BenchmarkMethod m) {
  switch (m) {
    case BenchmarkMethod::Proposed: return "proposed";
    case BenchmarkMethod::PlainAe: return "plain_ae";
    case BenchmarkMethod::Pca: return "pca";
  }
  return "unknown";
}

BenchmarkResult pca_baseline(const Dataset& train, Eigen::Index d) {
  const PcaResult pc = pca(train.X, d);
  BenchmarkResult r;
  r.method = BenchmarkMethod::Pca;
  r.latent = pc.scores;
  r.r_squared = ols_fit(pc.scores, train.y).r_squared;
  return r;
}

BenchmarkResult plain_ae_baseline(const Dataset& train, const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.lambda_pred = 0.0;
  cfg.lambda_reg = 0.0;
  const TrainedModel m = train_from(train, cfg, Autoencoder::initialize(train.p(), cfg.d, cfg.seed));
  BenchmarkResult r;
  r.method = BenchmarkMethod::PlainAe;
  r.latent = m.model.encode(train.X);
  r.r_squared = ols_fit(r.latent, train.y).r_squared;
  return r;
}

BenchmarkResult proposed_result(const Dataset& train, const Autoencoder& model) {
  BenchmarkResult r;
  r.method = BenchmarkMethod::Proposed;
  r.latent = model.encode(train.X);
  r.r_squared = ols_fit(r.latent, train.y).r_squared;
  return r;
}

std::vector<Eigen::Index> univariate_screen(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                            const Eigen::Ref<const Eigen::VectorXd>& y, double p_threshold) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double p = 1.0;
    try {
      p = ols_fit(X.col(j), y).p_values(1);
    } catch (const RuntimeError&) {
      continue;  // constant column
    }
    if (p < p_threshold) keep.push_back(j);
  }
  return keep;
}

double subset_aic(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                  const std::vector<Eigen::Index>& columns) {
  return design_aic(select_columns(X, columns), y);
}

BackwardResult backward_eliminate(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const std::vector<Eigen::Index>& candidates, const std::vector<std::string>& names,
                                  double aic_improvement) {
  if (candidates.empty()) throw ConfigError("backward_eliminate: no candidate variables");
  BackwardResult r;
  r.selected = candidates;
  double current = subset_aic(X, y, r.selected);
  while (!r.selected.empty()) {
    double best = kInf;
    std::size_t best_pos = 0;
    for (std::size_t k = 0; k < r.selected.size(); ++k) {
      std::vector<Eigen::Index> trial = r.selected;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
      const double aic = subset_aic(X, y, trial);
      if (aic < best) {
        best = aic;
        best_pos = k;
      }
    }
    if (!(current - best > aic_improvement)) break;
    const Eigen::Index removed = r.selected[best_pos];
    r.trace.push_back({"remove", names[static_cast<std::size_t>(removed)], current, best});
    r.selected.erase(r.selected.begin() + static_cast<std::ptrdiff_t>(best_pos));
    current = best;
  }
  return r;
}

Eigen::MatrixXd stepwise_design(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<Eigen::Index>& mains,
                                const std::vector<InteractionPair>& interactions) {
  Eigen::MatrixXd D(X.rows(), static_cast<Eigen::Index>(mains.size() + interactions.size()));
  Eigen::Index c = 0;
  for (const auto j : mains) D.col(c++) = X.col(j);
  for (const auto& [a, b] : interactions) D.col(c++) = X.col(a).cwiseProduct(X.col(b));
  return D;
}

ForwardResult forward_interactions(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                                   const std::vector<Eigen::Index>& main_effects, const std::vector<std::string>& names,
                                   double aic_improvement) {
  ForwardResult r;
  std::vector<InteractionPair> pool;
  for (std::size_t a = 0; a < main_effects.size(); ++a)
    for (std::size_t b = a + 1; b < main_effects.size(); ++b) pool.emplace_back(main_effects[a], main_effects[b]);

  const auto n = X.rows();
  std::set<InteractionPair> noted;
  double current = design_aic(stepwise_design(X, main_effects, r.interactions), y);
  while (!pool.empty()) {
    const Eigen::MatrixXd D = stepwise_design(X, main_effects, r.interactions);
    const auto q = D.cols();
    if (n <= q + 2) {
      r.notes.push_back("interaction search stopped: no residual degrees of freedom left");
      break;
    }
    // Adding column c lowers RSS by (e . c~)^2 / |c~|^2, c~ being c's residual on the current design.
    Eigen::MatrixXd A(n, q + 1);
    A.col(0).setOnes();
    A.rightCols(q) = D;
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, q + 1);
    const Eigen::VectorXd e = y - Q * (Q.transpose() * y);
    const double rss = e.squaredNorm();

    double best = kInf;
    std::size_t best_pos = pool.size();
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const Eigen::VectorXd c = X.col(pool[k].first).cwiseProduct(X.col(pool[k].second));
      const Eigen::VectorXd ct = c - Q * (Q.transpose() * c);
      const double cc = ct.squaredNorm();
      if (!(cc > 1e-10 * std::max(c.squaredNorm(), 1.0))) {
        if (noted.insert(pool[k]).second)
          r.notes.push_back("skipped collinear interaction " + pair_name(pool[k], names));
        continue;
      }
      const double dot = e.dot(ct);
      const double aic = gaussian_aic(std::max(rss - dot * dot / cc, 0.0), n, q + 2);
      if (aic < best) {
        best = aic;
        best_pos = k;
      }
    }
    if (best_pos == pool.size() || !(current - best > aic_improvement)) break;
    r.trace.push_back({"add", pair_name(pool[best_pos], names), current, best});
    r.interactions.push_back(pool[best_pos]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_pos));
    current = best;
  }
  return r;
}

StepwiseModel stepwise(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const std::vector<std::string>& names, const StepwiseOptions& options) {
  if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw ConfigError("stepwise: names do not match columns");
  StepwiseModel m;
  m.options = options;
  m.screened = univariate_screen(X, y, options.screening_p);
  if (m.screened.empty()) {
    m.notes.push_back("no variable passed screening");
  } else {
    BackwardResult back = backward_eliminate(X, y, m.screened, names, options.backward_threshold);
    m.main_effects = std::move(back.selected);
    m.trace = std::move(back.trace);
  }
  ForwardResult fwd = forward_interactions(X, y, m.main_effects, names, options.forward_threshold);
  m.interactions = std::move(fwd.interactions);
  m.trace.insert(m.trace.end(), fwd.trace.begin(), fwd.trace.end());
  m.notes.insert(m.notes.end(), fwd.notes.begin(), fwd.notes.end());

  for (const auto j : m.main_effects) m.term_names.push_back(names[static_cast<std::size_t>(j)]);
  for (const auto& pr : m.interactions) m.term_names.push_back(pair_name(pr, names));
  m.final_ols = ols_fit(stepwise_design(X, m.main_effects, m.interactions), y);
  return m;
}

}  // namespace latentreg
