#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "echogcn/agreement.hpp"
#include "helpers.hpp"

using namespace echogcn;
using echogcn::testing::thrown;

TEST(Agreement, ClassifyBoundaries) {
  EXPECT_EQ(classify(0.0), AgreementClass::Low);
  EXPECT_EQ(classify(0.8), AgreementClass::Low);
  EXPECT_EQ(classify(0.8000001), AgreementClass::Mid);
  EXPECT_EQ(classify(0.85), AgreementClass::Mid);
  EXPECT_EQ(classify(0.8999999), AgreementClass::Mid);
  EXPECT_EQ(classify(0.9), AgreementClass::High);
  EXPECT_EQ(classify(1.0), AgreementClass::High);
  EXPECT_EQ(thrown([] { classify(-0.01); }), Errc::OutOfRange);
  EXPECT_EQ(thrown([] { classify(1.01); }), Errc::OutOfRange);
  EXPECT_STREQ(to_string(AgreementClass::Mid), "Mid");
}

TEST(Agreement, RecordRetentionAtFilter) {
  EXPECT_TRUE(make_record("a", 0.85).retained);
  EXPECT_FALSE(make_record("b", 0.8499).retained);
  const AgreementRecord r = make_record("c", 0.95);
  EXPECT_EQ(r.frame_id, "c");
  EXPECT_EQ(r.cls, AgreementClass::High);
}

TEST(Agreement, ConfigValidation) {
  AgreementConfig c;
  EXPECT_NO_THROW(c.validate());
  c.filter_threshold = 0.95;
  EXPECT_EQ(thrown([&] { c.validate(); }), Errc::ConfigError);
  c = {};
  c.bin_width = 0;
  EXPECT_EQ(thrown([&] { c.validate(); }), Errc::ConfigError);
  c = {};
  c.low_threshold = 0.95;
  EXPECT_EQ(thrown([&] { c.validate(); }), Errc::ConfigError);
}

TEST(Histogram, BinsAndTopEdge) {
  const Histogram h = histogram({0.0, 0.005, 0.01, 0.5, 0.999, 1.0}, 0.01);
  ASSERT_EQ(h.counts.size(), 100u);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[50], 1u);
  EXPECT_EQ(h.counts[99], 2u);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), 6u);
  EXPECT_EQ(thrown([] { histogram({1.5}); }), Errc::OutOfRange);
  EXPECT_EQ(thrown([] { histogram({0.5}, 0.0); }), Errc::OutOfRange);
}

namespace {

std::vector<AgreementRecord> corpus() {
  std::vector<AgreementRecord> r;
  for (int i = 0; i < 30; ++i) r.push_back(make_record("f" + std::to_string(i), i / 29.0));
  return r;
}

}  // namespace

TEST(Partition, CountsClassesAndDeterminism) {
  const auto recs = corpus();
  const auto a = partition_sample(recs, 5, 3, 7);
  ASSERT_EQ(a.size(), 8u);
  EXPECT_EQ(std::count_if(a.begin(), a.end(), [](auto& r) { return r.cls == AgreementClass::Low; }), 5);
  EXPECT_EQ(std::count_if(a.begin(), a.end(), [](auto& r) { return r.cls == AgreementClass::High; }), 3);
  const auto b = partition_sample(recs, 5, 3, 7);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].frame_id, b[i].frame_id);
  std::vector<std::string> ids;
  for (auto& r : a) ids.push_back(r.frame_id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
}

TEST(Partition, Deficit) {
  const auto recs = corpus();
  // 0.9 * 29 = 26.1, so frames 27..29 are High.
  EXPECT_EQ(thrown([&] { partition_sample(recs, 1, 4, 1); }), Errc::InsufficientRecords);
  EXPECT_EQ(thrown([&] { partition_sample(recs, 30, 0, 1); }), Errc::InsufficientRecords);
  EXPECT_NO_THROW(partition_sample(recs, 0, 0, 1));
}
