#include "perfsig/ingest.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

using namespace perfsig;

namespace {

ParseResult parse_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_records(in, RecordFormat::csv);
}

ParseResult parse_ndjson(const std::string& text) {
    std::istringstream in(text);
    return parse_records(in, RecordFormat::ndjson);
}

TransactionRecord at(std::int64_t ms, std::string type = "tx", double response = 10.0) {
    return {Timestamp{Duration{ms}}, std::move(type), response};
}

bool windows_equal_again(const std::vector<SampleWindow>& a, const std::vector<SampleWindow>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].window_start != b[i].window_start || a[i].records != b[i].records || a[i].fittable != b[i].fittable) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST(ParseRecords, CsvFieldMapping) {
    const auto r = parse_csv("timestamp,transaction_type,response_ms\n2013-02-04T08:00:01.250Z,login,142.0\n");
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_TRUE(r.rejects.empty());
    EXPECT_EQ(r.records[0].timestamp, *parse_rfc3339("2013-02-04T08:00:01.250Z"));
    EXPECT_EQ(r.records[0].tx_type, "login");
    EXPECT_DOUBLE_EQ(r.records[0].response_ms, 142.0);
}

TEST(ParseRecords, NegativeResponseIsRejectedAndCounted) {
    const auto r = parse_csv("timestamp,transaction_type,response_ms\n"
                             "2013-02-04T08:00:01Z,login,-5\n"
                             "2013-02-04T08:00:02Z,login,7\n");
    EXPECT_EQ(r.records.size(), 1u);
    ASSERT_EQ(r.rejects.size(), 1u);
    EXPECT_EQ(r.rejects[0].line_no, 2u);
    EXPECT_EQ(r.rejects[0].reason, "negative response_ms");
}

TEST(ParseRecords, EmptyFileWithHeader) {
    const auto r = parse_csv("timestamp,transaction_type,response_ms\n");
    EXPECT_TRUE(r.records.empty());
    EXPECT_TRUE(r.rejects.empty());
}

TEST(ParseRecords, HeaderMismatchIsSchemaError) {
    EXPECT_THROW(parse_csv("time,type,ms\n1,a,2\n"), schema_error);
    EXPECT_THROW(parse_csv(""), schema_error);
}

TEST(ParseRecords, MixedTimestampStylesAreSchemaError) {
    EXPECT_THROW(parse_csv("timestamp,transaction_type,response_ms\n"
                           "1359964801250,a,1\n"
                           "2013-02-04T08:00:01Z,a,1\n"),
                 schema_error);
    EXPECT_THROW(parse_ndjson(R"({"timestamp":"2013-02-04T08:00:01Z","transaction_type":"a","response_ms":1})"
                              "\n"
                              R"({"timestamp":1359964801250,"transaction_type":"a","response_ms":1})"
                              "\n"),
                 schema_error);
}

TEST(ParseRecords, MalformedLinesContinue) {
    const auto r = parse_csv("timestamp,transaction_type,response_ms\r\n"
                             "1000,a,1\r\n"
                             "1001,\"a,b\",1\n"
                             "1002,a,b,1\n"
                             "1003,,1\n"
                             "1004,a,abc\n"
                             "nope,a,1\n"
                             "1005,a,\xff\n"
                             "\n"
                             "1006,b,2.5\n");
    ASSERT_EQ(r.records.size(), 2u);
    EXPECT_EQ(r.records[1].tx_type, "b");
    EXPECT_EQ(r.rejects.size(), 6u);
    std::set<std::size_t> lines;
    for (const auto& rej : r.rejects) {
        lines.insert(rej.line_no);
    }
    EXPECT_EQ(lines, (std::set<std::size_t>{3, 4, 5, 6, 7, 8}));
}

TEST(ParseRecords, NdjsonBasics) {
    const auto r = parse_ndjson(R"({"timestamp":1000,"transaction_type":"pay","response_ms":12.5})"
                                "\n"
                                R"({"timestamp":1001,"transaction_type":"pay"})"
                                "\n"
                                "not json\n"
                                R"({"timestamp":1002,"transaction_type":"pay","response_ms":-1})"
                                "\n");
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(epoch_ms(r.records[0].timestamp), 1000);
    EXPECT_EQ(r.rejects.size(), 3u);
}

TEST(ParseRecords, WrittenRecordsParseBack) {
    std::vector<TransactionRecord> recs{at(1359964801250, "login", 142.0), at(1359964801999, "pay", 0.5)};
    for (auto format : {RecordFormat::csv, RecordFormat::ndjson}) {
        std::stringstream ss;
        write_records(ss, recs, format);
        const auto back = parse_records(ss, format);
        EXPECT_TRUE(back.rejects.empty());
        EXPECT_EQ(back.records, recs);
    }
}

TEST(ParseRecords, RejectsReportIsNdjson) {
    std::ostringstream out;
    write_rejects(out, {{3, "negative response_ms"}});
    EXPECT_EQ(out.str(), "{\"line_no\":3,\"reason\":\"negative response_ms\"}\n");
}

TEST(ParseRecords, MissingFileIsIoError) {
    EXPECT_THROW(parse_records_file("/nonexistent/x.csv", RecordFormat::csv), io_error);
}

TEST(WindowRecords, TwelveMinutesGiveThreeWindows) {
    std::vector<TransactionRecord> recs;
    for (int i = 0; i < 100; ++i) {
        recs.push_back(at(i * 7'200)); // 0 .. 712.8 s
    }
    const auto w = window_records(recs, Duration{300'000}, 30);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[0].arrival_count + w[1].arrival_count + w[2].arrival_count, 100u);
    EXPECT_EQ(epoch_ms(w[1].window_start), 300'000);
}

TEST(WindowRecords, SmallWindowIsKeptButUnfittable) {
    std::vector<TransactionRecord> recs;
    for (int i = 0; i < 10; ++i) {
        recs.push_back(at(i));
    }
    const auto w = window_records(recs, Duration{300'000}, 30);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_FALSE(w[0].fittable);
    EXPECT_EQ(w[0].arrival_count, 10u);
}

TEST(WindowRecords, BoundaryRecordBelongsToLaterWindow) {
    const auto w = window_records({at(299'999), at(300'000)}, Duration{300'000}, 1);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(epoch_ms(w[1].records.at(0).timestamp), 300'000);
    EXPECT_EQ(w[0].arrival_count, 1u);
}

TEST(WindowRecords, AlignsToTruncatedFirstTimestampAndFillsGaps) {
    const auto w = window_records({at(310'000), at(1'000'000)}, Duration{300'000}, 1);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(epoch_ms(w[0].window_start), 300'000);
    EXPECT_EQ(w[1].arrival_count, 0u);
    EXPECT_FALSE(w[1].fittable);
}

TEST(WindowRecords, EmptyInputAndBadLength) {
    EXPECT_TRUE(window_records({}, Duration{1000}, 1).empty());
    EXPECT_THROW(window_records({at(0)}, Duration{0}, 1), precondition_error);
}

TEST(WindowRecords, PartitionPropertyOnShuffledInput) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TransactionRecord> recs;
        const int n = static_cast<int>(rng() % 500) + 1;
        for (int i = 0; i < n; ++i) {
            recs.push_back(at(static_cast<std::int64_t>(rng() % 5'000'000) - 1'000'000, "t" + std::to_string(i)));
        }
        const auto len = Duration{static_cast<std::int64_t>(rng() % 400'000) + 1};
        const auto windows = window_records(recs, len, 5);
        EXPECT_TRUE(windows_equal_again(windows, window_records(recs, len, 5)));

        std::multiset<std::string> seen;
        std::size_t total = 0;
        for (const auto& w : windows) {
            EXPECT_EQ(w.arrival_count, w.records.size());
            total += w.arrival_count;
            for (const auto& r : w.records) {
                EXPECT_GE(r.timestamp, w.window_start);
                EXPECT_LT(r.timestamp, w.window_start + w.window_length);
                seen.insert(r.tx_type);
            }
        }
        EXPECT_EQ(total, recs.size());
        std::multiset<std::string> expected;
        for (const auto& r : recs) {
            expected.insert(r.tx_type);
        }
        EXPECT_EQ(seen, expected);
    }
}
