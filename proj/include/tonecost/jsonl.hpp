#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <json.hpp>

namespace tonecost {

struct JsonlStats {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
};

/// Calls `fn` for each well-formed JSON object line; blank lines are ignored,
/// malformed lines are counted in `stats`. Throws Error if the file cannot be
/// opened.
JsonlStats for_each_jsonl(const std::filesystem::path& path,
                          const std::function<void(nlohmann::json&&)>& fn);

/// Append-style JSONL writer with one dump() per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);
  ~JsonlWriter();
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;

  void write(const nlohmann::json& obj);
  void close();
  std::size_t count() const { return count_; }

 private:
  std::filesystem::path path_;
  std::string buffer_;
  std::size_t count_ = 0;
  bool open_ = true;
};

/// Writes `content` to `path` atomically (temp file + rename).
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

/// Reads a whole file into a string. Throws Error if unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace tonecost
