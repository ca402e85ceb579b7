#pragma once

// Internal JSON parsing helpers. Writing goes through hand-rolled emitters
// (see sgdd/textio.hpp for the pinned float format); parsing is delegated to
// nlohmann/json with byte offsets converted to line/column context.

#include <string>

#include <json.hpp>

#include "sgdd/textio.hpp"

namespace sgdd::io {

// ParseError with "line L, column C" context on malformed input.
nlohmann::json parse_json_file(const std::string& path);
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);

}  // namespace sgdd::io
