#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scorecard {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text that cannot be interpreted (bad header, bad period, bad file).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// Fixed-point text with `digits` decimals, for human-facing summaries.
std::string format_fixed(double value, int digits);

/// Strict full-string parse; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string join(const std::vector<std::string>& parts, std::string_view delimiter);
std::string_view trim(std::string_view text);

/// Writes to `<path>.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Logistic function with the argument clamped so the result stays strictly in (0, 1).
inline double sigmoid(double x) {
  constexpr double kLimit = 36.0;
  if (x > kLimit) x = kLimit;
  if (x < -kLimit) x = -kLimit;
  return 1.0 / (1.0 + std::exp(-x));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace scorecard
