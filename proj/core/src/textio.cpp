#include "sgdd/textio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgdd/errors.hpp"

namespace sgdd::io {

std::string fmt_double(double v) {
  if (!std::isfinite(v)) throw NumericalError("fmt_double: non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure: " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace sgdd::io
