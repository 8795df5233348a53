#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"

#include "aiaudit/errors.hpp"

namespace aiaudit {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temporary file and renames it over the target.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  require(!ec, ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

/// Parses a JSON document; syntax errors become format errors naming the position.
inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // e.byte is 1-based; convert to line/column for the diagnostic.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorKind::Format, what + ": line " + std::to_string(line) + ", column " +
                                std::to_string(col) + ": " + e.what());
  }
}

inline Json read_json_file(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const AuditError& e) {
    fail(ErrorKind::Io, e.what());
  }
  return parse_json(text, path.string());
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace aiaudit
