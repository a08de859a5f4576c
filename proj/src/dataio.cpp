#include "latentreg/dataio.hpp"

#include "latentreg/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace latentreg {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

RawTable select_rows(const RawTable& table, const std::vector<Eigen::Index>& keep) {
  RawTable out;
  out.column_names = table.column_names;
  out.outcome_column = table.outcome_column;
  out.values.resize(static_cast<Eigen::Index>(keep.size()), table.values.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.values.row(static_cast<Eigen::Index>(r)) = table.values.row(keep[r]);
  if (!table.truth_labels.empty()) {
    out.truth_labels.reserve(keep.size());
    for (auto r : keep) out.truth_labels.push_back(table.truth_labels[static_cast<std::size_t>(r)]);
  }
  out.dropped_rows = table.dropped_rows + static_cast<std::size_t>(table.rows()) - keep.size();
  return out;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Eigen::Index RawTable::outcome_index() const {
  auto it = std::find(column_names.begin(), column_names.end(), outcome_column);
  if (it == column_names.end()) throw ConfigError("outcome column absent: " + outcome_column);
  return static_cast<Eigen::Index>(it - column_names.begin());
}

std::vector<Eigen::Index> RawTable::predictor_indices() const {
  const auto outcome = outcome_index();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(column_names.size()); ++c)
    if (c != outcome) idx.push_back(c);
  return idx;
}

double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const auto n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(n - 1);
}

double quantile_linear(std::vector<double> values, double prob) {
  if (values.empty()) throw ConfigError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

RawTable load_csv(const std::filesystem::path& path, const std::string& outcome_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV file: " + path.string());
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  RawTable table;
  table.column_names = split_line(line);
  table.outcome_column = outcome_column;
  std::set<std::string> unique(table.column_names.begin(), table.column_names.end());
  if (unique.size() != table.column_names.size()) throw ConfigError("duplicate column names in " + path.string());
  table.outcome_index();  // throws when absent

  const auto cols = table.column_names.size();
  std::vector<double> buffer;
  std::size_t rows = 0;
  std::size_t dropped = 0;
  std::vector<double> row(cols);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    bool ok = cells.size() == cols;
    for (std::size_t c = 0; ok && c < cols; ++c) {
      auto v = parse_number(cells[c]);
      if (!v) ok = false;
      else row[c] = *v;
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    buffer.insert(buffer.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ConfigError("no usable rows in " + path.string());

  table.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buffer.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  table.dropped_rows = dropped;
  return table;
}

void write_csv(const RawTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write CSV file: " + path.string());
  for (std::size_t c = 0; c < table.column_names.size(); ++c) {
    if (c) out << ',';
    out << table.column_names[c];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      if (c) out << ',';
      out << format_number(table.values(r, c));
    }
    out << '\n';
  }
}

RawTable variance_filter(const RawTable& table, double threshold) {
  if (table.rows() == 0) throw ConfigError("variance_filter: empty table");
  const auto outcome = table.outcome_index();
  std::vector<Eigen::Index> keep;
  bool any_predictor = false;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (c == outcome) {
      keep.push_back(c);
    } else if (sample_variance(table.values.col(c)) > threshold) {
      keep.push_back(c);
      any_predictor = true;
    }
  }
  if (!any_predictor) throw ConfigError("variance_filter: all predictors filtered out");

  RawTable out;
  out.outcome_column = table.outcome_column;
  out.dropped_rows = table.dropped_rows;
  out.truth_labels = table.truth_labels;
  out.values.resize(table.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.values.col(static_cast<Eigen::Index>(k)) = table.values.col(keep[k]);
    out.column_names.push_back(table.column_names[static_cast<std::size_t>(keep[k])]);
  }
  return out;
}

RawTable outlier_filter(const RawTable& table, double multiplier) {
  const auto n = table.rows();
  if (n < 4) throw ConfigError("outlier_filter: need at least 4 rows for quartiles");
  std::vector<bool> drop(static_cast<std::size_t>(n), false);
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    std::vector<double> col(table.values.col(c).data(), table.values.col(c).data() + n);
    const double q1 = quantile_linear(col, 0.25);
    const double q3 = quantile_linear(col, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - multiplier * iqr;
    const double hi = q3 + multiplier * iqr;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double v = table.values(r, c);
      if (v < lo || v > hi) drop[static_cast<std::size_t>(r)] = true;
    }
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < n; ++r)
    if (!drop[static_cast<std::size_t>(r)]) keep.push_back(r);
  if (keep.size() < 2) throw ConfigError("outlier_filter: fewer than 2 rows survive");
  return select_rows(table, keep);
}

RawTable preprocess(const RawTable& table, double variance_threshold, double iqr_multiplier) {
  return outlier_filter(variance_filter(table, variance_threshold), iqr_multiplier);
}

Dataset apply_standardization(const RawTable& table, const std::vector<Eigen::Index>& rows,
                              const Standardization& st) {
  const auto outcome = table.outcome_index();
  const auto predictors = table.predictor_indices();
  Dataset ds;
  ds.standardization = st;
  ds.source_rows = rows;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(predictors.size());
  ds.X.resize(n, p);
  ds.y.resize(n);
  for (Eigen::Index j = 0; j < p; ++j) ds.names.push_back(table.column_names[static_cast<std::size_t>(predictors[j])]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) ds.X(i, j) = (table.values(r, predictors[j]) - st.x_mean(j)) / st.x_sd(j);
    ds.y(i) = (table.values(r, outcome) - st.y_mean) / st.y_sd;
    if (!table.truth_labels.empty()) ds.truth_labels.push_back(table.truth_labels[static_cast<std::size_t>(r)]);
  }
  return ds;
}

std::pair<Dataset, Dataset> split_standardize(const RawTable& table, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0))
    throw ConfigError("split: train_fraction must lie in (0, 1]");
  const auto n = table.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<Eigen::Index>(std::floor(spec.train_fraction * static_cast<double>(n) + 1e-9));
  if (n_train < 2) throw ConfigError("split: training split has fewer than 2 rows");
  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> test_rows(order.begin() + n_train, order.end());

  const auto outcome = table.outcome_index();
  const auto predictors = table.predictor_indices();
  Standardization st;
  st.x_mean.resize(static_cast<Eigen::Index>(predictors.size()));
  st.x_sd.resize(static_cast<Eigen::Index>(predictors.size()));
  auto moments = [&](Eigen::Index col) {
    Eigen::VectorXd v(n_train);
    for (Eigen::Index i = 0; i < n_train; ++i) v(i) = table.values(train_rows[static_cast<std::size_t>(i)], col);
    const double sd = std::sqrt((v.array() - v.mean()).square().mean());
    if (!(sd > 0.0))
      throw ConfigError("split: column '" + table.column_names[static_cast<std::size_t>(col)] +
                        "' is constant on the training split");
    return std::pair{v.mean(), sd};
  };
  for (std::size_t j = 0; j < predictors.size(); ++j) {
    auto [m, s] = moments(predictors[j]);
    st.x_mean(static_cast<Eigen::Index>(j)) = m;
    st.x_sd(static_cast<Eigen::Index>(j)) = s;
  }
  std::tie(st.y_mean, st.y_sd) = moments(outcome);

  return {apply_standardization(table, train_rows, st), apply_standardization(table, test_rows, st)};
}

void SynthConfig::validate() const {
  if (n < 4) throw ConfigError("synthetic.n must be at least 4");
  if (p < 1) throw ConfigError("synthetic.p must be positive");
  if (d_true < 1 || d_true > p) throw ConfigError("synthetic.d_true must lie in [1, p]");
  if (!(noise_sd >= 0.0)) throw ConfigError("synthetic.noise_sd must be non-negative");
  Eigen::Index total = 0;
  for (const auto& g : subgroups) {
    if (g.size < 0) throw ConfigError("synthetic.subgroups.size must be non-negative");
    if (g.affected_factor < 0 || g.affected_factor >= d_true)
      throw ConfigError("synthetic.subgroups.affected_factor must be < d_true");
    total += g.size;
  }
  if (total > n) throw ConfigError("synthetic.subgroups.size: subgroup sizes exceed n");
  if (!factor_strength.empty() && static_cast<Eigen::Index>(factor_strength.size()) != d_true)
    throw ConfigError("synthetic.factor_strength must have d_true entries");
  if (!outcome_coefficients.empty() && static_cast<Eigen::Index>(outcome_coefficients.size()) != d_true)
    throw ConfigError("synthetic.outcome_coefficients must have d_true entries");
}

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const auto n = cfg.n;
  const auto p = cfg.p;
  const auto d = cfg.d_true;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SynthData out;
  out.factors.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index f = 0; f < d; ++f) out.factors(i, f) = normal(rng);

  // Contiguous, disjoint predictor blocks; the first p % d blocks get one extra column.
  out.loadings = Eigen::MatrixXd::Zero(d, p);
  out.block_of_predictor.resize(static_cast<std::size_t>(p));
  Eigen::Index col = 0;
  for (Eigen::Index f = 0; f < d; ++f) {
    const Eigen::Index width = p / d + (f < p % d ? 1 : 0);
    const double strength = cfg.factor_strength.empty() ? 1.0 : cfg.factor_strength[static_cast<std::size_t>(f)];
    for (Eigen::Index k = 0; k < width; ++k, ++col) {
      const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
      out.loadings(f, col) = sign * strength * (0.5 + 0.5 * unif(rng));
      out.block_of_predictor[static_cast<std::size_t>(col)] = f;
    }
  }

  out.outcome_coefficients.resize(d);
  for (Eigen::Index f = 0; f < d; ++f) {
    if (cfg.outcome_coefficients.empty()) {
      const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
      out.outcome_coefficients(f) = sign * (0.3 + 0.5 * unif(rng));
    } else {
      out.outcome_coefficients(f) = cfg.outcome_coefficients[static_cast<std::size_t>(f)];
    }
  }

  Eigen::MatrixXd X = out.factors * out.loadings;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) += cfg.noise_sd * normal(rng);

  // Each subgroup is the `size` unassigned subjects nearest a seeded centre that
  // sits one unit out along the affected factor (alternating sides), so members
  // share a region of the factor space.
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd y = out.factors * out.outcome_coefficients;
  for (std::size_t g = 0; g < cfg.subgroups.size(); ++g) {
    const auto& sub = cfg.subgroups[g];
    Eigen::VectorXd centre(d);
    for (Eigen::Index f = 0; f < d; ++f) centre(f) = 0.5 * normal(rng);
    centre(sub.affected_factor) = (g % 2 == 0) ? 1.0 : -1.0;
    std::vector<std::pair<double, Eigen::Index>> score;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double jitter = 1e-6 * unif(rng);
      if (labels[static_cast<std::size_t>(i)] != 0) continue;
      score.emplace_back((out.factors.row(i).transpose() - centre).norm() + jitter, i);
    }
    std::sort(score.begin(), score.end());
    for (Eigen::Index m = 0; m < sub.size; ++m) {
      const auto i = score[static_cast<std::size_t>(m)].second;
      labels[static_cast<std::size_t>(i)] = static_cast<int>(g) + 1;
      y(i) += sub.slope_delta * out.factors(i, sub.affected_factor);
    }
  }
  const double y_noise = cfg.outcome_noise_sd >= 0.0 ? cfg.outcome_noise_sd : cfg.noise_sd;
  for (Eigen::Index i = 0; i < n; ++i) y(i) += y_noise * normal(rng);

  RawTable& table = out.table;
  table.values.resize(n, p + 1);
  table.values.leftCols(p) = X;
  table.values.col(p) = y;
  const int digits = static_cast<int>(std::to_string(p).size());
  for (Eigen::Index j = 0; j < p; ++j) {
    std::string idx = std::to_string(j + 1);
    table.column_names.push_back("x" + std::string(static_cast<std::size_t>(digits) - idx.size(), '0') + idx);
  }
  table.column_names.emplace_back("y");
  table.outcome_column = "y";
  table.truth_labels = std::move(labels);
  return out;
}

}  // namespace latentreg
