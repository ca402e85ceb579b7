#include "sgdd/rng.hpp"

#include <algorithm>
#include <cmath>

#include "sgdd/errors.hpp"

namespace sgdd {
namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : root_seed_(seed) {
  uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

Rng Rng::child(std::string_view name) const {
  return Rng(root_seed_ ^ rotl(fnv1a64(name), 17));
}

Rng Rng::child(std::string_view name, uint64_t index) const {
  uint64_t h = fnv1a64(name);
  uint64_t mix = h ^ (0x9e3779b97f4a7c15ull * (index + 1));
  return Rng(root_seed_ ^ rotl(mix, 17));
}

uint64_t Rng::next_u64() {
  uint64_t* s = state_;
  uint64_t result = rotl(s[0] + s[3], 23) + s[0];
  uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller without the cached spare; keeps the stream layout simple.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw InputError("uniform_int: n must be positive");
  // Rejection sampling to avoid modulo bias.
  uint64_t un = static_cast<uint64_t>(n);
  uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<int>(x % un);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k < 0 || k > n) throw InputError("sample_without_replacement: k out of range");
  // Partial Fisher-Yates over an index array.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    int j = i + uniform_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace sgdd
