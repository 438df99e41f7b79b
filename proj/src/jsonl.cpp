#include "tonecost/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "tonecost/error.hpp"

namespace tonecost {

JsonlStats for_each_jsonl(const std::filesystem::path& path,
                          const std::function<void(nlohmann::json&&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  JsonlStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++stats.lines;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      ++stats.malformed;
      continue;
    }
    ++stats.parsed;
    fn(std::move(obj));
  }
  return stats;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path) : path_(path) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

JsonlWriter::~JsonlWriter() {
  if (open_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void JsonlWriter::write(const nlohmann::json& obj) {
  buffer_ += obj.dump();
  buffer_ += '\n';
  ++count_;
}

void JsonlWriter::close() {
  if (!open_) return;
  open_ = false;
  atomic_write_file(path_, buffer_);
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tonecost
