#include "jsonio.hpp"

#include "sgdd/errors.hpp"

namespace sgdd::io {

namespace {

std::pair<int, int> line_col(const std::string& text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(origin + ": parse error at line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": " + e.what());
  }
}

nlohmann::json parse_json_file(const std::string& path) {
  return parse_json_text(read_file(path), path);
}

}  // namespace sgdd::io
