#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "scorecard/dataset.hpp"

namespace testing {

using scorecard::dataset::Application;
using scorecard::dataset::Dataset;
using scorecard::dataset::Schema;

inline Application make_record(const std::string& id, const std::string& date, int label,
                               std::vector<double> numeric = {}, std::vector<std::string> nominal = {},
                               std::vector<int> binary = {}) {
  Application a;
  a.id = id;
  a.application_date = scorecard::dataset::parse_date(date);
  a.label = label;
  a.numeric = std::move(numeric);
  a.nominal = std::move(nominal);
  a.binary = std::move(binary);
  return a;
}

inline std::string month_date(int year, int month, int day = 15) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02d", year, month, day);
  return buffer;
}

/// Brute-force Mann-Whitney over every bad/good pair, in integer half-units.
inline double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  long long twice = 0;
  long long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) twice += 2;
      else if (s[i] == s[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

}  // namespace testing
