#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "relayrd/distortion.hpp"
#include "relayrd/probability.hpp"

namespace relayrd::rd {

// Side-information rate-distortion problem in encoder/decoder form:
// minimize I(enc ; U | dec) over channels p(u | enc) and deterministic
// decoders psi(u, dec), subject to E d(target, psi) <= budget. The encoder
// and decoder label sets may overlap; target must be encoder-visible.
struct WzSetup {
  prob::JointSource js;
  prob::Labels enc;
  prob::Labels dec;
  std::string target;
  DistortionMeasure d;
  int aux_cardinality = 0;  // 0: |target alphabet| + 2
  std::string aux_label = "U";
};

// One converged solve at a fixed Lagrange slope.
struct WzSlopePoint {
  std::vector<double> channel;  // p(u|e), e-major
  double rate = 0.0;            // bits
  double distortion = 0.0;
  double lagrangian = 0.0;      // rate + slope * distortion
};

// Alternating-minimization solver for the switch family. A single instance
// precomputes the joint tables; solves are const and thread-safe.
class WzSolver {
 public:
  explicit WzSolver(WzSetup setup);

  int aux_cardinality() const { return n_u_; }
  std::size_t enc_symbols() const { return n_e_; }
  // Distortion of the best decoder seeing only the dec side.
  double dmax_dec() const { return dmax_dec_; }
  // Lower bound on achievable distortion (encoder symbol fully described).
  double dmin_enc() const { return dmin_enc_; }

  // Best-of-restarts block descent at a fixed slope (bits per distortion).
  WzSlopePoint solve_at_slope(double slope, const SolverConfig& cfg,
                              const std::vector<std::vector<double>>& warm_channels = {}) const;

  // Meets the distortion budget via outer bisection on the slope; reports the
  // convexified (time-sharing) value. Throws InfeasibleError when the budget
  // is unreachable.
  RDPoint solve_budget(double budget, const SolverConfig& cfg) const;

  // Rate/distortion of a given channel under its optimal decoder.
  std::pair<double, double> evaluate(const std::vector<double>& channel) const;

  // Packages a raw channel as a ConditionalChannel over the encoder labels.
  prob::ConditionalChannel as_channel(const std::vector<double>& raw) const;
  DecoderMap decoder_for(const std::vector<double>& channel) const;

 private:
  struct Iterate;
  void decoder_step(const std::vector<double>& r, std::vector<int>& psi,
                    std::vector<double>& joint_usd_x) const;
  double distortion_of(const std::vector<int>& psi, const std::vector<double>& joint_usd_x) const;
  WzSlopePoint run_restart(double slope, const SolverConfig& cfg,
                           std::vector<double> r) const;

  WzSetup setup_;
  int n_u_ = 0;
  int n_src_ = 0;
  int n_recon_ = 0;
  std::size_t n_v_ = 0, n_e_ = 0, n_sd_ = 0;
  std::vector<double> p_v_, p_e_, p_sd_;
  std::vector<int> e_of_v_, sd_of_v_, t_of_v_;
  // v indices grouped by encoder symbol: block e is [e_start_[e], e_start_[e+1])
  std::vector<int> e_start_, v_by_e_;
  std::vector<int> enc_sizes_, dec_sizes_;
  double dmax_dec_ = 0.0, dmin_enc_ = 0.0;
};

// Lower convex envelope of a (distortion, rate) cloud evaluated at a budget.
// Returns the best rate and, through rep_index, the cloud point acting as the
// feasible-side representative. Returns +inf when no point is feasible.
double envelope_at(const std::vector<std::pair<double, double>>& points, double budget,
                   int* rep_index);

}  // namespace relayrd::rd
