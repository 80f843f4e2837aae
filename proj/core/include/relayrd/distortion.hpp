#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relayrd/probability.hpp"

namespace relayrd::rd {

// Nonnegative per-letter distortion between a source alphabet and a
// reconstruction alphabet.
class DistortionMeasure {
 public:
  DistortionMeasure(int source_card, int recon_card, std::vector<double> values);

  int source_card() const { return source_card_; }
  int recon_card() const { return recon_card_; }
  double at(int x, int j) const { return values_[static_cast<std::size_t>(x) * recon_card_ + j]; }
  const std::vector<double>& values() const { return values_; }
  double max_value() const;

  static DistortionMeasure hamming(int card);

 private:
  int source_card_;
  int recon_card_;
  std::vector<double> values_;
};

// Shared solver knobs. A zero aux_cardinality means "use the per-problem
// default" (|X| + 2 for the switch family).
struct SolverConfig {
  int aux_cardinality = 0;
  int restarts = 12;
  int max_iterations = 400;
  double tolerance = 1e-9;  // objective-change stopping threshold, bits
  std::vector<double> penalty_schedule = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t max_joint_aux_symbols = 4096;
};

// Deterministic reconstruction map over a joint context alphabet.
// recon[k] is the reconstruction index for context symbol k, row-major over
// the context labels in the listed order.
struct DecoderMap {
  prob::Labels context;
  std::vector<int> context_sizes;
  std::vector<int> recon;
  double distortion = 0.0;
};

// Achieved distortions may exceed the budget by at most this slack.
inline constexpr double kDistortionSlack = 1e-6;

// One solved point of a rate-distortion function. When the reported value is
// a time-sharing combination, channel/decoder hold the feasible-side
// representative of the combination.
struct RDPoint {
  double budget = 0.0;
  double rate = 0.0;
  double distortion = 0.0;
  bool feasible = false;
  std::optional<prob::ConditionalChannel> channel;
  std::optional<DecoderMap> decoder;
};

struct RDCurve {
  std::vector<RDPoint> points;
  bool convexified = false;
};

// Best deterministic reconstruction of source given the context variables.
// Ties go to the smallest reconstruction index; zero-probability contexts map
// to reconstruction 0.
DecoderMap optimal_decoder(const prob::JointSource& js, const prob::Labels& context,
                           const std::string& source, const DistortionMeasure& d);

// Expected distortion of the best decoder that sees only the context
// variables. Empty context gives the best constant reconstruction.
double dmax(const prob::JointSource& js, const std::string& source, const prob::Labels& context,
            const DistortionMeasure& d);

}  // namespace relayrd::rd
