#pragma once

// Append-only, line-delimited JSON event log. One event per line; a line is
// only meaningful once its terminating newline is on disk, so a torn tail is
// dropped on read and trimmed on open.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shyvote/error.hpp"
#include "shyvote/service/study.hpp"

namespace shyvote::service {

struct ParsedLog {
  std::vector<EventLogEntry> entries;
  std::size_t valid_bytes = 0;  // length of the prefix made of complete lines
  bool torn_tail = false;
};

inline ParsedLog parse_log(std::string_view text) {
  ParsedLog out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.torn_tail = true;
      break;
    }
    ++line_no;
    const auto line = text.substr(pos, nl - pos);
    try {
      out.entries.push_back(event_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::corruption,
                  "event log line " + std::to_string(line_no) + ": " + e.what());
    }
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

inline std::string serialize_event(const EventLogEntry& e) { return event_to_json(e).dump() + '\n'; }

class EventLog {
 public:
  /// Log kept only in memory.
  EventLog() = default;

  /// Opens (creating if needed) a log file for appending, trimming any torn
  /// tail left by an interrupted write.
  static EventLog open_file(const std::filesystem::path& path, bool sync_writes,
                            ParsedLog* existing = nullptr) {
    EventLog log;
    log.path_ = path;
    log.sync_ = sync_writes;
    if (std::filesystem::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      auto parsed = parse_log(buf.str());
      if (parsed.torn_tail) std::filesystem::resize_file(path, parsed.valid_bytes);
      if (existing != nullptr) *existing = std::move(parsed);
    }
    log.file_.reset(std::fopen(path.c_str(), "ab"));
    if (!log.file_) {
      throw Error(ErrorKind::invalid_config, "cannot open event log " + path.string());
    }
    return log;
  }

  void append(const EventLogEntry& entry) {
    const auto line = serialize_event(entry);
    if (!file_) {
      memory_ += line;
      return;
    }
    if (std::fwrite(line.data(), 1, line.size(), file_.get()) != line.size() ||
        std::fflush(file_.get()) != 0) {
      throw Error(ErrorKind::corruption, "failed to append to " + path_.string());
    }
    if (sync_) ::fsync(::fileno(file_.get()));
  }

  /// Current log contents.
  std::string contents() const {
    if (!file_) return memory_;
    std::ifstream in(path_, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  struct Closer {
    void operator()(std::FILE* f) const { std::fclose(f); }
  };

  std::filesystem::path path_;
  bool sync_ = false;
  std::unique_ptr<std::FILE, Closer> file_;
  std::string memory_;
};

}  // namespace shyvote::service
