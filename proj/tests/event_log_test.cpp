#include <gtest/gtest.h>

#include <fstream>

#include "nof1/error.hpp"
#include "nof1/event_log.hpp"
#include "test_util.hpp"

using namespace nof1;

TEST(EventLog, Crc32cCheckValue) {
  EXPECT_EQ(crc32c("123456789"), 0xE3069283u);
  EXPECT_EQ(crc32c(""), 0u);
}

TEST(EventLog, AppendAndReadBack) {
  testutil::TempDir dir;
  const auto path = dir.path() / "log" / "events.log";
  {
    EventLog log(path);
    EXPECT_EQ(log.append(10, "patient", "p1", Json{{"x", 1}}).seq, 1u);
    EXPECT_EQ(log.append(11, "trial", "t1", Json{{"y", "z"}}).seq, 2u);
  }
  EventLog reopened(path);
  EXPECT_EQ(reopened.last_seq(), 2u);
  const auto all = reopened.read_all();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1].entity, "trial");
  EXPECT_EQ(all[1].payload.at("y"), "z");
  EXPECT_EQ(reopened.append(12, "trial", "t1", Json::object()).seq, 3u);
}

namespace {

void rewrite(const std::filesystem::path& path, const std::function<void(std::vector<std::string>&)>& f) {
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  f(lines);
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

std::string corrupt_message(const std::filesystem::path& path) {
  try {
    EventLog log(path);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptLog);
    return e.what();
  }
  return "";
}

}  // namespace

TEST(EventLog, ChecksumMismatchNamesSeq) {
  testutil::TempDir dir;
  const auto path = dir.path() / "events.log";
  {
    EventLog log(path);
    for (int i = 0; i < 5; ++i) log.append(i, "trial", "t", Json{{"v", i}});
  }
  rewrite(path, [](auto& lines) {
    auto j = Json::parse(lines[2]);
    j["payload"]["v"] = 99;
    lines[2] = j.dump();
  });
  EXPECT_EQ(corrupt_message(path), "corrupt event log: checksum mismatch at seq 3");
}

TEST(EventLog, TruncatedLineAndSeqOrder) {
  testutil::TempDir dir;
  const auto path = dir.path() / "events.log";
  {
    EventLog log(path);
    for (int i = 0; i < 3; ++i) log.append(i, "trial", "t", Json{{"v", i}});
  }
  rewrite(path, [](auto& lines) { lines[2] = lines[2].substr(0, lines[2].size() / 2); });
  EXPECT_EQ(corrupt_message(path), "corrupt event log: unparseable entry at line 3");

  rewrite(path, [](auto& lines) {
    lines.pop_back();
    lines.push_back(lines[0]);
  });
  EXPECT_EQ(corrupt_message(path), "corrupt event log: non-increasing seq 1");
}
