#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace relayrd::prob {

// Information quantities are reported in bits throughout.
using InfoValue = double;

using Labels = std::vector<std::string>;

// pmf entries below this magnitude are treated as exact zeros inside log
// computations (0 log 0 := 0).
inline constexpr double kZeroMass = 1e-15;

// Numerical floor for mutual informations; anything more negative than this
// indicates a genuine defect rather than rounding.
inline constexpr double kMiFloor = -1e-10;

// Finite joint distribution over an ordered list of labelled variables.
// The pmf is stored flat in row-major order: the first label varies slowest.
// Construction normalizes the mass to 1 and records the normalization factor.
class JointSource {
 public:
  JointSource(Labels labels, std::vector<int> sizes, std::vector<double> pmf);

  const Labels& labels() const { return labels_; }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<double>& pmf() const { return pmf_; }
  double normalization_factor() const { return norm_factor_; }

  std::size_t total_size() const { return pmf_.size(); }
  // Position of a label in the variable order; throws on unknown labels.
  int var_index(const std::string& label) const;
  bool has_label(const std::string& label) const;
  // Positions for a label subset, in the order the subset lists them.
  std::vector<int> positions_of(const Labels& subset) const;
  // Row-major stride of the variable at position pos.
  std::size_t stride(int pos) const { return strides_[pos]; }

  // Symbol of variable pos inside the flat index.
  int symbol_at(std::size_t flat_index, int pos) const {
    return static_cast<int>(flat_index / strides_[pos]) % sizes_[pos];
  }

 private:
  Labels labels_;
  std::vector<int> sizes_;
  std::vector<double> pmf_;
  std::vector<std::size_t> strides_;
  double norm_factor_ = 1.0;
};

// Row-stochastic map from a joint parent symbol to a joint output symbol.
// Outputs may be a product alphabet (several new labels adjoined at once).
// Rows are indexed row-major over the parent labels in the order given here,
// columns row-major over the output labels. Rows are normalized to sum 1.
class ConditionalChannel {
 public:
  ConditionalChannel(Labels outputs, std::vector<int> out_sizes, Labels parents,
                     std::vector<int> parent_sizes, std::vector<double> rows);

  const Labels& outputs() const { return outputs_; }
  const std::vector<int>& out_sizes() const { return out_sizes_; }
  const Labels& parents() const { return parents_; }
  const std::vector<int>& parent_sizes() const { return parent_sizes_; }

  std::size_t row_count() const { return rows_count_; }
  std::size_t col_count() const { return cols_count_; }
  double at(std::size_t row, std::size_t col) const { return rows_[row * cols_count_ + col]; }
  const std::vector<double>& values() const { return rows_; }

  // Deterministic channel copying the parents' joint symbol into the output.
  static ConditionalChannel deterministic_copy(const Labels& outputs, const std::vector<int>& out_sizes,
                                               const Labels& parents, const std::vector<int>& parent_sizes,
                                               const std::vector<int>& symbol_map);
  // Channel ignoring its parents, emitting a fixed output symbol.
  static ConditionalChannel constant(const Labels& outputs, const std::vector<int>& out_sizes,
                                     const Labels& parents, const std::vector<int>& parent_sizes,
                                     int fixed_symbol = 0);

 private:
  Labels outputs_;
  std::vector<int> out_sizes_;
  Labels parents_;
  std::vector<int> parent_sizes_;
  std::vector<double> rows_;
  std::size_t rows_count_ = 0;
  std::size_t cols_count_ = 0;
};

// Builds a JointSource from raw values. Negative entries, an all-zero mass,
// and size/length mismatches are errors; the mass is normalized to 1 with the
// factor recorded on the result.
JointSource validate_source(std::vector<double> values, Labels labels, std::vector<int> sizes);

// Marginal over a label subset; the surviving labels keep their original
// relative order regardless of the order in keep.
JointSource marginal(const JointSource& js, const Labels& keep);

// H(target | given) in bits. Overlapping target/given sets are an error;
// empty given yields the unconditional entropy.
InfoValue entropy(const JointSource& js, const Labels& target, const Labels& given = {});

// I(a ; b | given) in bits, clamped to 0 from below at the numerical floor.
// The three label sets must be pairwise disjoint.
InfoValue mutual_information(const JointSource& js, const Labels& a, const Labels& b,
                             const Labels& given = {});

// Conditional-independence defect of the chain a - b - c: I(a ; c | b).
InfoValue markov_slack(const JointSource& js, const Labels& a, const Labels& b, const Labels& c);

// Adjoins the channel's outputs to js: p(omega, o) = p(omega) ch(o | parents).
// Channel parents must all be labels of js with matching sizes; output labels
// must be fresh.
JointSource extend(const JointSource& js, const ConditionalChannel& ch);

}  // namespace relayrd::prob
