#include "nof1/event_log.hpp"

#include <boost/crc.hpp>

#include "nof1/error.hpp"

namespace nof1 {

std::uint32_t crc32c(std::string_view data) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

Json to_line(const EventLogEntry& e) {
  return Json{{"seq", e.seq},           {"ts", e.ts},
              {"entity", e.entity},     {"entity_id", e.entity_id},
              {"payload", e.payload},   {"crc32c", e.checksum}};
}

EventLogEntry from_line(std::string_view line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kCorruptLog, "corrupt event log: unparseable entry at " + where, "event_log");
  }
  EventLogEntry e;
  try {
    e.seq = j.at("seq").get<std::uint64_t>();
    e.ts = j.at("ts").get<std::int64_t>();
    e.entity = j.at("entity").get<std::string>();
    e.entity_id = j.value("entity_id", std::string());
    e.payload = j.at("payload");
    e.checksum = j.at("crc32c").get<std::uint32_t>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kCorruptLog, "corrupt event log: malformed entry at " + where, "event_log");
  }
  if (crc32c(e.payload.dump()) != e.checksum) {
    fail(ErrorCode::kCorruptLog,
         "corrupt event log: checksum mismatch at seq " + std::to_string(e.seq), "event_log");
  }
  return e;
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  drop_torn_tail();
  const auto existing = read_all();
  if (!existing.empty()) last_seq_ = existing.back().seq;
  out_.open(path_, std::ios::app);
  require(static_cast<bool>(out_), ErrorCode::kInternal,
          "cannot open event log '" + path_.string() + "'", "data_dir");
}

// Drops an unterminated final line left by a crash mid-append.
void EventLog::drop_torn_tail() {
  if (!std::filesystem::exists(path_)) return;
  std::string data;
  {
    std::ifstream in(path_, std::ios::binary);
    data.assign(std::istreambuf_iterator<char>(in), {});
  }
  if (data.empty() || data.back() == '\n') return;
  const auto cut = data.find_last_of('\n');
  std::filesystem::resize_file(path_, cut == std::string::npos ? 0 : cut + 1);
  torn_tail_dropped_ = true;
}

std::vector<EventLogEntry> EventLog::read_all() const {
  std::vector<EventLogEntry> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto e = from_line(line, line_no);
    if (!out.empty() && e.seq <= out.back().seq) {
      fail(ErrorCode::kCorruptLog,
           "corrupt event log: non-increasing seq " + std::to_string(e.seq), "event_log");
    }
    out.push_back(std::move(e));
  }
  return out;
}

EventLogEntry EventLog::append(std::int64_t ts, std::string entity, std::string entity_id,
                               Json payload) {
  EventLogEntry e;
  e.seq = last_seq_ + 1;
  e.ts = ts;
  e.entity = std::move(entity);
  e.entity_id = std::move(entity_id);
  e.payload = std::move(payload);
  e.checksum = crc32c(e.payload.dump());
  out_ << to_line(e).dump() << '\n';
  out_.flush();
  require(static_cast<bool>(out_), ErrorCode::kInternal, "event log write failed", "event_log");
  last_seq_ = e.seq;
  return e;
}

}  // namespace nof1
