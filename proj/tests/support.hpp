#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <random>
#include <vector>

#include "nasality/signal_core.hpp"

namespace test {

inline constexpr double kPi = 3.14159265358979323846;

inline nasality::Signal sine(double amp, double freq, double rate, double seconds, double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(rate * seconds));
  nasality::Signal s{std::vector<double>(n), rate, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    s.samples[i] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / rate + phase);
  return s;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(NASALITY_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace test
