#include "latentreg/dataio.hpp"
#include "latentreg/error.hpp"
#include "latentreg/numstat.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <limits>

using namespace latentreg;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

RawTable make_table(const Eigen::MatrixXd& values, std::vector<std::string> names, std::string outcome) {
  RawTable t;
  t.values = values;
  t.column_names = std::move(names);
  t.outcome_column = std::move(outcome);
  return t;
}

double pop_sd(const Eigen::VectorXd& v) { return std::sqrt((v.array() - v.mean()).square().mean()); }

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("load_csv parses a numeric table") {
    const auto dir = testing::scratch_dir("csv");
    const auto path = write_file(dir, "a.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
    const RawTable t = load_csv(path, "y");
    CHECK(t.rows() == 3);
    CHECK(t.predictor_indices().size() == 2);
    CHECK(t.outcome_index() == 2);
    CHECK(t.values(2, 1) == 8.0);
    CHECK(t.dropped_rows == 0);
  }

  TEST_CASE("load_csv drops rows with missing or non-numeric cells") {
    const auto dir = testing::scratch_dir("csv");
    const auto path = write_file(dir, "a.csv", "a,b,y\n1,2,3\n4,NA,6\n7,8,9\n1,,2\n");
    const RawTable t = load_csv(path, "y");
    CHECK(t.rows() == 2);
    CHECK(t.dropped_rows == 2);

    const auto one = write_file(dir, "b.csv", "a,y\n1,2\nNA,3\n4,5\n");
    CHECK(load_csv(one, "y").dropped_rows == 1);
  }

  TEST_CASE("load_csv error paths") {
    const auto dir = testing::scratch_dir("csv");
    const auto path = write_file(dir, "a.csv", "a,b\n1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(path, "y"), doctest::Contains("outcome column absent"), ConfigError);
    CHECK_THROWS_AS(load_csv(dir / "missing.csv", "y"), ConfigError);
    const auto dup = write_file(dir, "dup.csv", "a,a,y\n1,2,3\n");
    CHECK_THROWS_AS(load_csv(dup, "y"), ConfigError);
    const auto empty = write_file(dir, "e.csv", "a,y\nNA,1\n");
    CHECK_THROWS_AS(load_csv(empty, "y"), ConfigError);
  }

  TEST_CASE("write_csv round trips exactly") {
    const auto dir = testing::scratch_dir("csv");
    RawTable t = make_table(testing::random_matrix(6, 3, 4), {"u", "v", "y"}, "y");
    write_csv(t, dir / "t.csv");
    const RawTable back = load_csv(dir / "t.csv", "y");
    CHECK(back.column_names == t.column_names);
    CHECK(back.values == t.values);
  }

  TEST_CASE("variance_filter examples") {
    Eigen::MatrixXd v(4, 4);
    v << 0, 5, 1, 1,  //
        1, 5, 2, 0,   //
        0, 5, 3, 1,   //
        1, 5, 4, 0;
    const RawTable t = make_table(v, {"alt", "const", "ramp", "y"}, "y");
    CHECK(sample_variance(v.col(0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const RawTable f = variance_filter(t, 0.2);
    CHECK(f.column_names == std::vector<std::string>{"alt", "ramp", "y"});
    CHECK(f.values.col(0) == v.col(0));  // values untouched

    CHECK(variance_filter(t, 0.0).column_names == std::vector<std::string>{"alt", "ramp", "y"});
    CHECK(variance_filter(t, 0.5).column_names == std::vector<std::string>{"ramp", "y"});
    CHECK_THROWS_AS(variance_filter(t, 100.0), ConfigError);
  }

  TEST_CASE("quantile_linear matches the interpolation rule") {
    CHECK(quantile_linear({1, 2, 3, 4, 1000}, 0.25) == 2.0);
    CHECK(quantile_linear({1, 2, 3, 4, 1000}, 0.75) == 4.0);
    CHECK(quantile_linear({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile_linear({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  }

  TEST_CASE("outlier_filter examples") {
    Eigen::MatrixXd v(5, 2);
    v << 1, 0.1,  //
        2, 0.2,   //
        3, 0.3,   //
        4, 0.4,   //
        1000, 0.5;
    const RawTable t = make_table(v, {"x", "y"}, "y");
    const RawTable f = outlier_filter(t, 4.0);  // Q1 = 2, Q3 = 4, upper fence 12
    CHECK(f.rows() == 4);
    CHECK(f.dropped_rows == 1);
    CHECK(f.values.col(0).maxCoeff() == 4.0);

    Eigen::MatrixXd c(5, 2);
    c << 7, 1, 7, 2, 7, 3, 7, 4, 7, 5;
    CHECK(outlier_filter(make_table(c, {"x", "y"}, "y")).rows() == 5);
    CHECK(outlier_filter(t, 1e12).rows() == 5);
    CHECK_THROWS_AS(outlier_filter(make_table(v.topRows(3), {"x", "y"}, "y")), ConfigError);
  }

  TEST_CASE("split sizes and determinism") {
    const RawTable t = make_table(testing::random_matrix(217, 3, 1), {"a", "b", "y"}, "y");
    const auto [tr, te] = split_standardize(t, {0.8, 42});
    CHECK(tr.n() == 173);
    CHECK(te.n() == 44);
    const auto [tr2, te2] = split_standardize(t, {0.8, 42});
    CHECK(tr.source_rows == tr2.source_rows);
    CHECK(tr.X == tr2.X);
    const auto [tr3, te3] = split_standardize(t, {0.8, 43});
    CHECK(tr.source_rows != tr3.source_rows);
    CHECK_THROWS_AS(split_standardize(t, {0.0, 1}), ConfigError);
    CHECK_THROWS_AS(split_standardize(t, {1.5, 1}), ConfigError);
  }

  TEST_CASE("train standardization invariants; test uses train statistics") {
    Eigen::MatrixXd v = testing::random_matrix(50, 4, 2);
    v.col(1) = 3.0 * v.col(1).array() + 10.0;
    const RawTable t = make_table(v, {"a", "b", "c", "y"}, "y");
    const auto [tr, te] = split_standardize(t, {0.7, 9});
    CHECK(tr.n() + te.n() == 50);
    for (Eigen::Index j = 0; j < tr.p(); ++j) {
      CHECK(std::abs(tr.X.col(j).mean()) < 1e-9);
      CHECK(std::abs(pop_sd(tr.X.col(j)) - 1.0) < 1e-9);
    }
    CHECK(std::abs(tr.y.mean()) < 1e-9);
    CHECK(std::abs(pop_sd(tr.y) - 1.0) < 1e-9);
    const auto& st = tr.standardization;
    for (Eigen::Index i = 0; i < te.n(); ++i) {
      const auto r = te.source_rows[static_cast<std::size_t>(i)];
      CHECK(te.X(i, 1) == doctest::Approx((v(r, 1) - st.x_mean(1)) / st.x_sd(1)));
      CHECK(te.y(i) == doctest::Approx((v(r, 3) - st.y_mean) / st.y_sd));
    }
  }

  TEST_CASE("balanced +-1 column is a fixed point of standardization") {
    Eigen::MatrixXd v(6, 2);
    v << -1, 1, 1, 2, -1, 3, 1, 4, -1, 5, 1, 6;
    const auto [tr, te] = split_standardize(make_table(v, {"x", "y"}, "y"), {1.0, 3});
    CHECK(te.n() == 0);
    for (Eigen::Index i = 0; i < tr.n(); ++i) CHECK(tr.X(i, 0) == v(tr.source_rows[static_cast<std::size_t>(i)], 0));
  }

  TEST_CASE("standardization is idempotent on the train split") {
    const RawTable t = make_table(testing::random_matrix(40, 3, 5) * 4.0, {"a", "b", "y"}, "y");
    const auto [tr, te] = split_standardize(t, {1.0, 5});
    Eigen::MatrixXd again(tr.n(), 3);
    again << tr.X, tr.y;
    const auto [tr2, te2] = split_standardize(make_table(again, {"a", "b", "y"}, "y"), {1.0, 11});
    for (Eigen::Index i = 0; i < tr2.n(); ++i) {
      const auto r = tr2.source_rows[static_cast<std::size_t>(i)];
      CHECK((tr2.X.row(i) - tr.X.row(r)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(tr2.y(i) - tr.y(r)) < 1e-12);
    }
  }

  TEST_CASE("constant train column is rejected") {
    Eigen::MatrixXd v = testing::random_matrix(10, 2, 3);
    v.col(0).setConstant(2.0);
    CHECK_THROWS_AS(split_standardize(make_table(v, {"x", "y"}, "y"), {0.8, 1}), ConfigError);
  }

  TEST_CASE("synthetic: noiseless outcome is exactly linear in the factors") {
    SynthConfig cfg;
    cfg.n = 120;
    cfg.p = 20;
    cfg.d_true = 3;
    cfg.noise_sd = 0.0;
    cfg.seed = 8;
    const SynthData sd = generate_synthetic(cfg);
    const Eigen::VectorXd y = sd.table.values.col(sd.table.outcome_index());
    const OlsResult fit = ols_fit(sd.factors, y);
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.residuals.norm() < 1e-9);
  }

  TEST_CASE("synthetic: bookkeeping, blocks and determinism") {
    SynthConfig cfg;
    cfg.n = 200;
    cfg.p = 62;
    cfg.d_true = 4;
    cfg.subgroups = {{30, 1, 1.5}};
    cfg.seed = 3;
    const SynthData a = generate_synthetic(cfg);
    CHECK(std::count(a.table.truth_labels.begin(), a.table.truth_labels.end(), 1) == 30);
    CHECK(a.table.values.rows() == 200);
    CHECK(a.table.values.cols() == 63);
    CHECK(a.table.column_names.front() == "x01");
    CHECK(a.table.column_names.back() == "y");
    for (Eigen::Index j = 0; j < cfg.p; ++j) {
      Eigen::Index nonzero = 0;
      for (Eigen::Index f = 0; f < cfg.d_true; ++f) nonzero += a.loadings(f, j) != 0.0;
      CHECK(nonzero == 1);
      CHECK(a.loadings(a.block_of_predictor[static_cast<std::size_t>(j)], j) != 0.0);
    }
    const SynthData b = generate_synthetic(cfg);
    CHECK(a.table.values == b.table.values);
    CHECK(a.table.truth_labels == b.table.truth_labels);

    // Members sit in one region of the affected factor.
    double member_mean = 0.0;
    for (Eigen::Index i = 0; i < cfg.n; ++i)
      if (a.table.truth_labels[static_cast<std::size_t>(i)] == 1) member_mean += a.factors(i, 1) / 30.0;
    CHECK(member_mean > 0.5);
  }

  TEST_CASE("synthetic config validation names the field") {
    SynthConfig cfg;
    cfg.n = 10;
    cfg.subgroups = {{11, 0, 1.0}};
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("synthetic.subgroups.size"), ConfigError);
    cfg.subgroups = {{3, 9, 1.0}};
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("affected_factor"), ConfigError);
  }

  TEST_CASE("preprocess removes exactly the injected outlier rows") {
    SynthConfig cfg;
    cfg.n = 250;
    cfg.p = 12;
    cfg.d_true = 3;
    cfg.seed = 21;
    RawTable t = generate_synthetic(cfg).table;
    const std::vector<Eigen::Index> injected{3, 77, 150, 249};
    for (std::size_t k = 0; k < injected.size(); ++k) t.values(injected[k], static_cast<Eigen::Index>(k)) += 60.0;
    const RawTable f = preprocess(t, 0.2, 4.0);
    CHECK(f.rows() == 246);
    CHECK(f.dropped_rows == 4);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      if (std::find(injected.begin(), injected.end(), i) != injected.end()) continue;
      CHECK(f.values.row(r) == t.values.row(i));
      ++r;
    }
  }
}
