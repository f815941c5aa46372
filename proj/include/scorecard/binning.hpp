#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scorecard/common.hpp"
#include "scorecard/dataset.hpp"

namespace scorecard::binning {

enum class BinKind {
  kInterval,  // numeric [lo, hi)
  kClassSet,  // nominal tokens
  kMissing,   // missing values
  kCross,     // one interaction cell
  kCatchAll,  // sparse interaction cells pooled together
};

struct Bin {
  BinKind kind = BinKind::kInterval;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::vector<std::string> classes;
  /// Interaction cells as tuples of component bin indices.
  std::vector<std::vector<int>> cells;
  std::size_t good = 0;
  std::size_t bad = 0;
  double woe = 0.0;
  /// False when the bin had no goods or no bads and carries the fallback WoE.
  bool woe_defined = false;

  std::size_t count() const { return good + bad; }
  friend bool operator==(const Bin&, const Bin&) = default;
};

enum class CharacteristicType { kNumeric, kNominal, kBinary, kInteraction };

struct Characteristic {
  std::string name;
  CharacteristicType type = CharacteristicType::kNumeric;
  /// Attribute name for plain characteristics; empty for interactions.
  std::string attribute;
  /// Inputs of an interaction, in cell-tuple order.
  std::vector<Characteristic> components;
  std::vector<Bin> bins;
  std::size_t total_good = 0;
  std::size_t total_bad = 0;
  double iv = 0.0;
  double average_woe = 0.0;

  friend bool operator==(const Characteristic&, const Characteristic&) = default;
};

struct BinningConfig {
  std::size_t max_pre_bins = 20;
  double min_bin_fraction = 0.02;
  /// Adjacent pairs below this Pearson statistic (1 df) keep merging; 3.841 is the 5% level.
  double chi_square_threshold = 3.841;
  bool monotonic_woe = true;

  void validate() const;
};

/// ln((g/G)/(b/B)); `fallback` when g or b is zero. Throws when G or B is zero.
double compute_woe(std::size_t g, std::size_t b, std::size_t total_good, std::size_t total_bad, double fallback);

/// Sum of (g/G - b/B) * WoE over bins with a defined WoE.
double compute_iv(const Characteristic& characteristic);

/// Assigns WoE to each bin (fallback = count-weighted mean of the defined
/// WoEs), then average_woe and iv.
void finalize(Characteristic& characteristic);

/// Pearson chi-square of a 2x2 table of adjacent bins against the label.
double adjacent_chi_square(std::size_t g1, std::size_t b1, std::size_t g2, std::size_t b2);

/// Quantile pre-binning followed by greedy adjacent chi-square merging. NaN
/// values go to a trailing missing bucket. Returned bins carry counts only.
std::vector<Bin> supervised_bin(std::span<const double> values, std::span<const int> labels,
                                const BinningConfig& config);

/// One bin per distinct token plus a missing bucket for empty tokens.
std::vector<Bin> class_bins(std::span<const std::string> tokens, std::span<const int> labels);

/// Labels of a fitting sample; throws if any record is unlabeled.
std::vector<int> labels_of(const dataset::Dataset& sample);

/// Fits a plain characteristic on the named attribute (numeric, nominal or binary).
Characteristic fit_characteristic(const dataset::Dataset& sample, const std::string& attribute,
                                  const BinningConfig& config);

/// Cross-product of the component bins; cells under min_bin_fraction of the
/// sample are pooled into one catch-all bin.
Characteristic build_interaction(const std::vector<Characteristic>& components, const dataset::Dataset& sample,
                                 const BinningConfig& config);

/// How encoding treats a nominal token never seen while fitting.
enum class UnfamiliarPolicy {
  kAverageWoe,  // the characteristic's average partial score
  kOtherBin,    // the "Other" bin if the characteristic has one
};

/// Resolves attribute columns once and maps records to bins and WoE vectors.
class Encoder {
 public:
  Encoder(const dataset::Schema& schema, std::vector<Characteristic> characteristics,
          UnfamiliarPolicy policy = UnfamiliarPolicy::kAverageWoe);

  const std::vector<Characteristic>& characteristics() const { return characteristics_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return characteristics_.size(); }

  /// Bin of characteristic `c` for the record, or nullopt when the value is
  /// unfamiliar (or missing with no missing bucket).
  std::optional<std::size_t> bin_index(std::size_t c, const dataset::Application& record) const;
  std::vector<double> encode(const dataset::Application& record) const;
  /// Row-major n x size() matrix.
  std::vector<double> encode_all(const dataset::Dataset& data) const;

 private:
  struct Resolved {
    CharacteristicType type = CharacteristicType::kNumeric;
    std::size_t column = 0;
    std::unordered_map<std::string, std::size_t> classes;
    std::optional<std::size_t> missing_bin;
    std::optional<std::size_t> other_bin;
    std::optional<std::size_t> catch_all;
    std::vector<Resolved> components;
    std::map<std::vector<int>, std::size_t> cells;
  };

  static Resolved resolve(const dataset::Schema& schema, const Characteristic& c);
  std::optional<std::size_t> locate(const Characteristic& c, const Resolved& r,
                                    const dataset::Application& record) const;

  std::vector<Characteristic> characteristics_;
  std::vector<Resolved> resolved_;
  UnfamiliarPolicy policy_;
};

std::vector<double> encode(const dataset::Application& record, const dataset::Schema& schema,
                           const std::vector<Characteristic>& characteristics);

/// Tab-separated, one bin per line; interactions nest their components.
std::string write_characteristics(const std::vector<Characteristic>& characteristics);
std::vector<Characteristic> read_characteristics(const std::string& text);

std::string_view type_name(CharacteristicType type);

}  // namespace scorecard::binning
