#include "relayrd/probability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace relayrd::prob {

namespace {

std::size_t checked_total(const std::vector<int>& sizes) {
  std::size_t total = 1;
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("alphabet sizes must be >= 1");
    total *= static_cast<std::size_t>(s);
  }
  return total;
}

// Compensated accumulation keeps entropy sums accurate to ~1 ulp even for
// thousands of equal terms.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

double entropy_of_masses(const std::vector<double>& p) {
  KahanSum acc;
  for (double v : p) {
    if (v > kZeroMass) acc.add(-v * std::log2(v));
  }
  return acc.value();
}

}  // namespace

JointSource::JointSource(Labels labels, std::vector<int> sizes, std::vector<double> pmf)
    : labels_(std::move(labels)), sizes_(std::move(sizes)), pmf_(std::move(pmf)) {
  if (labels_.size() != sizes_.size())
    throw std::invalid_argument("label/size count mismatch");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    for (std::size_t j = i + 1; j < labels_.size(); ++j)
      if (labels_[i] == labels_[j]) throw std::invalid_argument("duplicate label: " + labels_[i]);
  std::size_t total = checked_total(sizes_);
  if (pmf_.size() != total) throw std::invalid_argument("pmf length does not match alphabet sizes");
  double sum = 0.0;
  for (double v : pmf_) {
    if (v < 0.0) throw std::invalid_argument("negative pmf entry");
    sum += v;
  }
  if (sum <= 0.0) throw std::invalid_argument("pmf has no mass");
  norm_factor_ = sum;
  for (double& v : pmf_) v /= sum;
  strides_.assign(sizes_.size(), 1);
  for (int i = static_cast<int>(sizes_.size()) - 2; i >= 0; --i)
    strides_[i] = strides_[i + 1] * static_cast<std::size_t>(sizes_[i + 1]);
}

int JointSource::var_index(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  throw std::invalid_argument("unknown label: " + label);
}

bool JointSource::has_label(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::vector<int> JointSource::positions_of(const Labels& subset) const {
  std::vector<int> pos;
  pos.reserve(subset.size());
  for (const auto& l : subset) pos.push_back(var_index(l));
  return pos;
}

ConditionalChannel::ConditionalChannel(Labels outputs, std::vector<int> out_sizes, Labels parents,
                                       std::vector<int> parent_sizes, std::vector<double> rows)
    : outputs_(std::move(outputs)),
      out_sizes_(std::move(out_sizes)),
      parents_(std::move(parents)),
      parent_sizes_(std::move(parent_sizes)),
      rows_(std::move(rows)) {
  if (outputs_.empty()) throw std::invalid_argument("channel needs at least one output label");
  if (outputs_.size() != out_sizes_.size() || parents_.size() != parent_sizes_.size())
    throw std::invalid_argument("channel label/size count mismatch");
  rows_count_ = checked_total(parent_sizes_);
  cols_count_ = checked_total(out_sizes_);
  if (rows_.size() != rows_count_ * cols_count_)
    throw std::invalid_argument("channel matrix length does not match alphabets");
  for (std::size_t r = 0; r < rows_count_; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols_count_; ++c) {
      double v = rows_[r * cols_count_ + c];
      if (v < 0.0) throw std::invalid_argument("negative channel entry");
      sum += v;
    }
    if (sum <= 0.0) throw std::invalid_argument("channel row with no mass");
    for (std::size_t c = 0; c < cols_count_; ++c) rows_[r * cols_count_ + c] /= sum;
  }
}

ConditionalChannel ConditionalChannel::deterministic_copy(const Labels& outputs,
                                                          const std::vector<int>& out_sizes,
                                                          const Labels& parents,
                                                          const std::vector<int>& parent_sizes,
                                                          const std::vector<int>& symbol_map) {
  std::size_t rows = checked_total(parent_sizes);
  std::size_t cols = checked_total(out_sizes);
  if (symbol_map.size() != rows) throw std::invalid_argument("symbol map length mismatch");
  std::vector<double> m(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    int c = symbol_map[r];
    if (c < 0 || static_cast<std::size_t>(c) >= cols)
      throw std::invalid_argument("symbol map value out of range");
    m[r * cols + static_cast<std::size_t>(c)] = 1.0;
  }
  return ConditionalChannel(outputs, out_sizes, parents, parent_sizes, std::move(m));
}

ConditionalChannel ConditionalChannel::constant(const Labels& outputs, const std::vector<int>& out_sizes,
                                                const Labels& parents, const std::vector<int>& parent_sizes,
                                                int fixed_symbol) {
  std::size_t rows = checked_total(parent_sizes);
  std::vector<int> map(rows, fixed_symbol);
  return deterministic_copy(outputs, out_sizes, parents, parent_sizes, map);
}

JointSource validate_source(std::vector<double> values, Labels labels, std::vector<int> sizes) {
  return JointSource(std::move(labels), std::move(sizes), std::move(values));
}

namespace {

// Accumulates the marginal over the variables at the given positions.
std::vector<double> marginal_masses(const JointSource& js, const std::vector<int>& positions) {
  std::size_t out_size = 1;
  for (int p : positions) out_size *= static_cast<std::size_t>(js.sizes()[p]);
  std::vector<double> out(out_size, 0.0);
  const auto& pmf = js.pmf();
  for (std::size_t idx = 0; idx < pmf.size(); ++idx) {
    if (pmf[idx] == 0.0) continue;
    std::size_t sub = 0;
    for (int p : positions) sub = sub * static_cast<std::size_t>(js.sizes()[p]) + js.symbol_at(idx, p);
    out[sub] += pmf[idx];
  }
  return out;
}

double entropy_of_positions(const JointSource& js, std::vector<int> positions) {
  if (positions.empty()) return 0.0;
  return entropy_of_masses(marginal_masses(js, positions));
}

std::vector<int> sorted_union(const JointSource& js, const Labels& a, const Labels& b,
                              const Labels& c = {}) {
  std::vector<int> pos = js.positions_of(a);
  for (int p : js.positions_of(b)) pos.push_back(p);
  for (int p : js.positions_of(c)) pos.push_back(p);
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  return pos;
}

}  // namespace

JointSource marginal(const JointSource& js, const Labels& keep) {
  std::vector<int> pos = js.positions_of(keep);
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  if (pos.empty()) throw std::invalid_argument("marginal needs at least one label");
  Labels labels;
  std::vector<int> sizes;
  for (int p : pos) {
    labels.push_back(js.labels()[p]);
    sizes.push_back(js.sizes()[p]);
  }
  return JointSource(std::move(labels), std::move(sizes), marginal_masses(js, pos));
}

InfoValue entropy(const JointSource& js, const Labels& target, const Labels& given) {
  if (target.empty()) throw std::invalid_argument("entropy target must be nonempty");
  double h_joint = entropy_of_positions(js, sorted_union(js, target, given));
  if (given.empty()) return h_joint;
  double h_given = entropy_of_positions(js, sorted_union(js, given, {}));
  return h_joint - h_given;
}

InfoValue mutual_information(const JointSource& js, const Labels& a, const Labels& b,
                             const Labels& given) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mutual_information needs nonempty sets");
  // I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C); overlapping sets follow the
  // union convention (variables shared with C contribute nothing).
  double v = entropy_of_positions(js, sorted_union(js, a, given)) +
             entropy_of_positions(js, sorted_union(js, b, given)) -
             entropy_of_positions(js, sorted_union(js, a, b, given)) -
             entropy_of_positions(js, sorted_union(js, given, {}));
  if (v < 0.0) {
    if (v < kMiFloor) throw std::logic_error("mutual information below numerical floor");
    v = 0.0;
  }
  return v;
}

InfoValue markov_slack(const JointSource& js, const Labels& a, const Labels& b, const Labels& c) {
  return mutual_information(js, a, c, b);
}

JointSource extend(const JointSource& js, const ConditionalChannel& ch) {
  for (const auto& out : ch.outputs())
    if (js.has_label(out)) throw std::invalid_argument("channel output collides with label: " + out);
  std::vector<int> parent_pos = js.positions_of(ch.parents());
  for (std::size_t i = 0; i < parent_pos.size(); ++i)
    if (js.sizes()[parent_pos[i]] != ch.parent_sizes()[i])
      throw std::invalid_argument("channel parent size mismatch for: " + ch.parents()[i]);

  Labels labels = js.labels();
  std::vector<int> sizes = js.sizes();
  for (std::size_t i = 0; i < ch.outputs().size(); ++i) {
    labels.push_back(ch.outputs()[i]);
    sizes.push_back(ch.out_sizes()[i]);
  }
  std::size_t cols = ch.col_count();
  std::vector<double> pmf(js.total_size() * cols);
  const auto& base = js.pmf();
  for (std::size_t idx = 0; idx < base.size(); ++idx) {
    std::size_t row = 0;
    for (std::size_t i = 0; i < parent_pos.size(); ++i)
      row = row * static_cast<std::size_t>(ch.parent_sizes()[i]) +
            js.symbol_at(idx, parent_pos[i]);
    for (std::size_t c = 0; c < cols; ++c) pmf[idx * cols + c] = base[idx] * ch.at(row, c);
  }
  return JointSource(std::move(labels), std::move(sizes), std::move(pmf));
}

}  // namespace relayrd::prob
