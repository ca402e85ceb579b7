#include "manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgdd/errors.hpp"

namespace sgdd::tool {

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path);

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

void write_manifest(const Manifest& m, const std::string& path) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"tool\": \"sgdd\",\n";
  out << "  \"version\": \"0.1.0\",\n";
  out << "  \"command\": \"" << m.command << "\",\n";
  out << "  \"seed\": " << m.seed << ",\n";
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.3f", m.wall_clock_s);
  out << "  \"wall_clock_s\": " << wall << ",\n";
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  out << "  \"timestamp\": \"" << stamp << "\",\n";
  auto emit_map = [&](const char* key,
                      const std::vector<std::pair<std::string, std::string>>& entries,
                      bool last) {
    out << "  \"" << key << "\": {";
    for (size_t i = 0; i < entries.size(); ++i) {
      if (i) out << ",";
      out << "\n    \"" << entries[i].first << "\": \"" << entries[i].second << "\"";
    }
    out << (entries.empty() ? "}" : "\n  }") << (last ? "\n" : ",\n");
  };
  emit_map("inputs", m.inputs, false);
  emit_map("outputs", m.outputs, true);
  out << "}\n";

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write manifest: " + path);
  f << out.str();
}

}  // namespace sgdd::tool
