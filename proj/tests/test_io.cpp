#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "v2x_isac/engines.hpp"
#include "v2x_isac/sample_io.hpp"

using namespace v2x_isac;

namespace {

SampleSet small_set() { return run_batch(EngineKind::kMc, default_config(), 300, 5); }

}  // namespace

TEST(SampleCsv, RoundTripWithinPrintedPrecision) {
  const SampleSet set = small_set();
  std::stringstream ss;
  write_samples_csv(ss, set);
  const SampleSet back = read_samples_csv(ss);
  ASSERT_EQ(back.samples.size(), set.samples.size());
  EXPECT_EQ(back.engine, set.engine);
  EXPECT_EQ(back.seed, set.seed);
  EXPECT_EQ(back.config_digest, set.config_digest);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& a = set.samples[i];
    const auto& b = back.samples[i];
    EXPECT_EQ(a.target_present, b.target_present);
    EXPECT_EQ(a.los_c, b.los_c);
    if (a.s_c > 0) EXPECT_NEAR(b.s_c / a.s_c, 1.0, 1e-5);
    if (a.i_total > 0) EXPECT_NEAR(b.i_total / a.i_total, 1.0, 1e-5);
    EXPECT_EQ(a.r_c.has_value(), b.r_c.has_value());
  }
}

TEST(SampleBinary, ExactRoundTrip) {
  const SampleSet set = small_set();
  std::stringstream ss;
  write_samples_binary(ss, set);
  const SampleSet back = read_samples_binary(ss);
  ASSERT_EQ(back.samples.size(), set.samples.size());
  EXPECT_EQ(back.config_digest, set.config_digest);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].s_r, set.samples[i].s_r);
    EXPECT_EQ(back.samples[i].s_c, set.samples[i].s_c);
    EXPECT_EQ(back.samples[i].i_total, set.samples[i].i_total);
    EXPECT_EQ(back.samples[i].r_r, set.samples[i].r_r);
    EXPECT_EQ(back.samples[i].los_c, set.samples[i].los_c);
  }
}

TEST(SampleBinary, TruncationAndBadMagic) {
  const SampleSet set = small_set();
  std::stringstream ss;
  write_samples_binary(ss, set);
  std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(read_samples_binary(cut), FormatError);
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  EXPECT_THROW(read_samples_binary(bad), FormatError);
}

TEST(SampleCsv, SchemaErrors) {
  std::stringstream no_manifest("engine,index\n");
  EXPECT_THROW(read_samples_csv(no_manifest), FormatError);
  std::stringstream wrong_header(manifest_header("abc", 1) + "\nengine,index\n");
  EXPECT_THROW(read_samples_csv(wrong_header), FormatError);
  std::stringstream short_row(manifest_header("abc", 1) + "\n" + kSampleCsvHeader + "\nsg,0,1\n");
  EXPECT_THROW(read_samples_csv(short_row), FormatError);
}

TEST(ManifestHeader, CarriesDigestSeedAndTool) {
  const std::string h = manifest_header("0123abcd", 42);
  EXPECT_EQ(h.rfind("# manifest:", 0), 0u);
  EXPECT_NE(h.find("seed=42"), std::string::npos);
  EXPECT_NE(h.find(kToolVersion), std::string::npos);
  EXPECT_EQ(digest_of_header(h), "0123abcd");
}

TEST(ParseDouble, SpecialValues) {
  EXPECT_EQ(parse_double("inf", "x"), std::numeric_limits<double>::infinity());
  EXPECT_EQ(parse_double("-inf", "x"), -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isnan(parse_double("nan", "x")));
  EXPECT_THROW(parse_double("1.5abc", "x"), FormatError);
}

TEST(Observations, RoundTrip) {
  std::vector<LinkObservation> obs{{LinkKind::kComm, 12.5, 1e-9, true, 3},
                                   {LinkKind::kInterference, 40.0, 0.0, false, 3},
                                   {LinkKind::kRadar, 20.0, 2e-10, std::nullopt, 4}};
  std::stringstream ss;
  write_observations_csv(ss, "d", 1, obs);
  const auto back = read_observations_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].kind, LinkKind::kComm);
  EXPECT_EQ(back[0].los, std::optional<bool>(true));
  EXPECT_EQ(back[1].power, 0.0);
  EXPECT_FALSE(back[2].los.has_value());
  EXPECT_EQ(back[2].realization, 4u);
  EXPECT_NEAR(back[0].power / 1e-9, 1.0, 1e-6);
}

TEST(Densities, RoundTripAndUnknownPopulation) {
  std::vector<DensityRow> rows{{0, "same_lane", {5, 1000.0}}, {0, "rsu", {2, 995.0}}};
  std::stringstream ss;
  write_densities_csv(ss, "d", 1, rows);
  const auto back = read_densities_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].count.count, 2u);
  EXPECT_DOUBLE_EQ(back[1].count.window, 995.0);
  std::stringstream bad(manifest_header("d", 1) + "\n" + kDensityHeader + "\n0,trucks,1,10\n");
  EXPECT_THROW(read_densities_csv(bad), FormatError);
}

TEST(Curves, RoundTripAndGaps) {
  const SimulationConfig c = default_config();
  const CurveTables a = sweep(run_batch(EngineKind::kSg, c, 2000, 1).samples, c.thresholds);
  const CurveTables b = sweep(run_batch(EngineKind::kMc, c, 2000, 1).samples, c.thresholds);
  std::stringstream ss;
  write_curves_csv(ss, "d", 1, {{"sg", a}, {"mc", b}});
  const auto back = read_curves_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].first, "sg");
  ASSERT_EQ(back[0].second.jrsccp.size(), a.jrsccp.size());
  for (std::size_t i = 0; i < a.coverage.size(); ++i) {
    EXPECT_NEAR(back[0].second.coverage[i].estimate.value, a.coverage[i].estimate.value, 1e-8);
    EXPECT_NEAR(back[0].second.coverage[i].first, a.coverage[i].first, 1e-6 * a.coverage[i].first);
  }
  const GapSummary self = max_gap(MetricKind::kCoverage, "sg", a, "sg", back[0].second);
  EXPECT_LE(self.max_abs_gap, 1e-8);
  const GapSummary g = max_gap(MetricKind::kJrsccp, "sg", a, "mc", b);
  EXPECT_GT(g.max_abs_gap, 0.0);
  CurveTables shorter = b;
  shorter.coverage.pop_back();
  EXPECT_THROW(max_gap(MetricKind::kCoverage, "sg", a, "mc", shorter), std::invalid_argument);
}
