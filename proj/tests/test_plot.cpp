#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vhslice/plot.hpp"

using namespace vhslice;

namespace {

SweepResult sample() {
  SweepResult r;
  for (double u : {10.0, 15.0})
    for (auto v : {RewardVariant::video_haptic, RewardVariant::baseline})
      for (std::uint64_t seed : {1u, 2u}) {
        ResultRow row{"users", u, v, 1, {}};
        row.trial.seed = seed;
        row.trial.sr = 0.25 * static_cast<double>(seed);
        row.trial.mean_reward = -1.5;
        r.rows.push_back(row);
      }
  return r;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Plot, LineChartHasOnePathPerSeries) {
  const auto svg = plot::sweep_chart(sample(), "users");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_NE(svg.find("video-haptic (1 ms)"), std::string::npos);
  EXPECT_NE(svg.find("baseline (1 ms)"), std::string::npos);
}

TEST(Plot, BarChartHasOneBarPerGroupAndSeries) {
  const auto svg = plot::interval_chart(sample());
  EXPECT_EQ(count(svg, "<rect x="), 4u + 2u + 1u);  // bars, legend swatches, plot frame
}

TEST(Plot, TitlesAreEscaped) {
  const auto svg = plot::line_chart_svg("a<b & c", "x", "y", {});
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
}

TEST(Plot, ResultsCsvRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "vhslice_results.csv").string();
  {
    std::ofstream out(path);
    write_results_csv(sample(), out);
  }
  const auto back = plot::read_results_csv(path);
  ASSERT_EQ(back.rows.size(), 8u);
  EXPECT_EQ(back.rows[3].variant, RewardVariant::baseline);
  EXPECT_EQ(back.rows[3].trial.sr, 0.5);
  EXPECT_EQ(back.rows[3].trial.seed, 2u);
  std::ofstream(path) << "sweep,param_value,variant,t_slice_ms,seed,sr,mean_reward\nusers,1,vh,1,1,abc,0\n";
  try {
    plot::read_results_csv(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::filesystem::remove(path);
}
