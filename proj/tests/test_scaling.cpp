#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "otoc_lab/errors.hpp"
#include "otoc_lab/records.hpp"
#include "otoc_lab/scaling.hpp"

using namespace otoc;

namespace {

ScalingSeries synthetic(int n_min, int n_max, double amplitude, double exponent) {
  ScalingSeries series;
  series.observable = "synthetic";
  for (int n = n_min; n <= n_max; ++n) series.points.push_back({n, amplitude * std::pow(n, -exponent), 0.0});
  return series;
}

}  // namespace

TEST(FitLine, ExactLineAndErrors) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y{1.5, 3.5, 5.5, 7.5};
  const LineFit fit = fit_line(x, y);
  EXPECT_NEAR(fit.slope, 2.0, 1e-14);
  EXPECT_NEAR(fit.intercept, -0.5, 1e-14);
  EXPECT_LT(fit.rms_residual, 1e-14);
  EXPECT_THROW(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}), InsufficientDataError);
  EXPECT_THROW(fit_line(std::vector<double>{2.0, 2.0}, std::vector<double>{1.0, 3.0}),
               InsufficientDataError);
  EXPECT_THROW(fit_line(x, std::vector<double>{1.0}), DimensionError);
}

TEST(PowerLaw, RecoversSyntheticLaw) {
  const PowerLawFit fit = power_law_fit(synthetic(4, 12, 2.0, 3.0), 5);
  EXPECT_NEAR(fit.amplitude, 2.0, 1e-12);
  EXPECT_NEAR(fit.exponent, 3.0, 1e-12);
  EXPECT_LE(fit.rms_log_residual, 1e-12);
  EXPECT_EQ(fit.n_min, 8);
  EXPECT_EQ(fit.n_max, 12);
  EXPECT_EQ(fit.points, 5u);
  const auto record = fit_record(fit);
  EXPECT_EQ(record.at("fit_range"), nlohmann::json::array({8, 12}));
}

TEST(PowerLaw, RefusesThinOrNonpositiveData) {
  const ScalingSeries series = synthetic(5, 8, 1.0, 1.0);
  EXPECT_THROW(power_law_fit(series, 2), InsufficientDataError);
  EXPECT_THROW(power_law_fit(series, 5), InsufficientDataError);
  EXPECT_THROW(power_law_fit(synthetic(5, 5, 1.0, 1.0), 3), InsufficientDataError);
  ScalingSeries bad = series;
  bad.points[0].value = -1.0;
  EXPECT_NO_THROW(power_law_fit(bad, 3));
  EXPECT_THROW(power_law_fit(bad, 4), DomainError);
}

TEST(Sweep, EmptyRangeGivesEmptySeries) {
  SweepConfig config;
  config.n_min = 8;
  config.n_max = 7;
  const ScalingSeries series = run_scaling_sweep(config, Observable::fn);
  EXPECT_TRUE(series.points.empty());
  EXPECT_TRUE(series.excluded.empty());
}

TEST(Sweep, LeadingPredictionIsExact) {
  SweepConfig config;
  config.n_min = 5;
  config.n_max = 14;
  const ScalingSeries series = run_scaling_sweep(config, Observable::gn);
  ASSERT_EQ(series.points.size(), 10u);
  for (const auto& p : series.points) EXPECT_NEAR(p.value, (14.0 / 15.0) / p.sites, 1e-15) << p.sites;
}

TEST(Sweep, DegenerateSizesAreExcludedAndFlagged) {
  SweepConfig config;
  config.n_min = 5;
  config.n_max = 6;
  config.coupling = 0.0;
  const ScalingSeries series = run_scaling_sweep(config, Observable::fn);
  const bool six_excluded = std::any_of(series.excluded.begin(), series.excluded.end(),
                                        [](const ExcludedPoint& e) { return e.sites == 6; });
  EXPECT_TRUE(six_excluded);
  for (const auto& p : series.points) EXPECT_NE(p.sites, 6);
  for (const auto& e : series.excluded) EXPECT_FALSE(e.reason.empty());
}

TEST(Sweep, OutputIsReproducible) {
  SweepConfig config;
  config.n_min = 5;
  config.n_max = 7;
  config.generic_tolerance = kPrecisionGenericTolerance;
  const auto first = run_scaling_sweeps(config, {Observable::fn, Observable::gn_minus_fn});
  config.threads = 1;
  const auto second = run_scaling_sweeps(config, {Observable::fn, Observable::gn_minus_fn});
  ASSERT_EQ(first.size(), 2u);
  for (std::size_t k = 0; k < first.size(); ++k) {
    std::ostringstream a;
    std::ostringstream b;
    write_series_csv(a, first[k], 3);
    write_series_csv(b, second[k], 3);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(first[k].points.size(), 3u);
  }
  for (std::size_t j = 0; j < first[0].points.size(); ++j) {
    const auto& fn = first[0].points[j];
    EXPECT_NEAR(first[1].points[j].value, (14.0 / 15.0) / fn.sites - fn.value, 1e-15);
  }
}

TEST(SeriesCsv, Format) {
  ScalingSeries series;
  series.observable = "F_n";
  series.coupling = 0.1;
  series.points = {{5, 0.125, 0.0}, {6, 0.1, 0.5}};
  std::ostringstream out;
  write_series_csv(out, series, 42);
  EXPECT_EQ(out.str(), "# observable=F_n g=0.1 seed=42 version=" + std::string(version()) +
                           "\nn,value,error\n5,0.125,0\n6,0.1,0.5\n");
}

TEST(Observables, ParseAndPrint) {
  for (Observable o : {Observable::fn, Observable::gn, Observable::gn_minus_fn,
                       Observable::theorem_residual}) {
    EXPECT_EQ(parse_observable(to_string(o)), o);
  }
  EXPECT_EQ(parse_observable("fn"), Observable::fn);
  EXPECT_EQ(parse_observable("gn_minus_fn"), Observable::gn_minus_fn);
  EXPECT_THROW(parse_observable("hn"), DomainError);
}
