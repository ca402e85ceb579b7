#pragma once

#include <string>

namespace sgdd::io {

// %.17g — enough significant digits for an exact double round trip. Throws
// NumericalError on non-finite values; on-disk artifacts must stay loadable.
std::string fmt_double(double v);

std::string read_file(const std::string& path);                        // IoError
void write_file(const std::string& path, const std::string& content);  // IoError

}  // namespace sgdd::io
