#pragma once

// Append-only event log: one JSON object per line,
//   {"seq", "ts", "entity", "entity_id", "payload", "crc32c"}
// where crc32c covers the compact serialization of "payload".

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "nof1/json.hpp"

namespace nof1 {

std::uint32_t crc32c(std::string_view data);

struct EventLogEntry {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;
  std::string entity;     // "patient" | "trial" | "budget" | "contribution"
  std::string entity_id;
  Json payload;
  std::uint32_t checksum = 0;
};

Json to_line(const EventLogEntry& e);
// Throws kCorruptLog naming the sequence number (or line) at fault.
EventLogEntry from_line(std::string_view line, std::size_t line_no);

class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);

  // Validates checksums and strictly increasing sequence numbers.
  std::vector<EventLogEntry> read_all() const;

  EventLogEntry append(std::int64_t ts, std::string entity, std::string entity_id, Json payload);

  std::uint64_t last_seq() const { return last_seq_; }
  const std::filesystem::path& path() const { return path_; }
  bool torn_tail_dropped() const { return torn_tail_dropped_; }

 private:
  void drop_torn_tail();

  std::filesystem::path path_;
  std::uint64_t last_seq_ = 0;
  bool torn_tail_dropped_ = false;
  std::ofstream out_;
};

}  // namespace nof1
