#include "perfsig/time.hpp"

#include <gtest/gtest.h>

using namespace perfsig;

TEST(Time, ParsesUtcWithMillis) {
    const auto t = parse_rfc3339("2013-02-04T08:00:01.250Z");
    ASSERT_TRUE(t);
    // 2013-02-04T00:00:00Z is 1359936000 s after the epoch.
    EXPECT_EQ(epoch_ms(*t), 1359936000LL * 1000 + 8 * 3600 * 1000 + 1250);
}

TEST(Time, OffsetsAreApplied) {
    const auto utc = parse_rfc3339("2013-02-04T08:00:00Z");
    const auto aest = parse_rfc3339("2013-02-04T18:00:00+10:00");
    ASSERT_TRUE(utc && aest);
    EXPECT_EQ(*utc, *aest);
}

TEST(Time, TruncatesSubMillisecondDigits) {
    const auto t = parse_rfc3339("1970-01-01T00:00:00.123987Z");
    ASSERT_TRUE(t);
    EXPECT_EQ(epoch_ms(*t), 123);
}

TEST(Time, RejectsGarbage) {
    EXPECT_FALSE(parse_rfc3339("2013-02-30T08:00:00Z"));
    EXPECT_FALSE(parse_rfc3339("2013-02-04T08:00:00"));
    EXPECT_FALSE(parse_rfc3339("2013-02-04 08:00"));
    EXPECT_FALSE(parse_rfc3339("2013-02-04T08:00:00.Z"));
    EXPECT_FALSE(parse_epoch_ms("12a"));
    EXPECT_FALSE(parse_epoch_ms(""));
}

TEST(Time, FormatRoundTrips) {
    for (std::int64_t ms : {0LL, 1359964801250LL, 86399999LL, 951782400000LL}) {
        const Timestamp t{Duration{ms}};
        const auto back = parse_rfc3339(format_rfc3339(t));
        ASSERT_TRUE(back) << format_rfc3339(t);
        EXPECT_EQ(*back, t);
    }
    EXPECT_EQ(format_rfc3339(Timestamp{Duration{1250}}), "1970-01-01T00:00:01.250Z");
}
