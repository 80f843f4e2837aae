#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "relayrd/distortion.hpp"
#include "relayrd/probability.hpp"

namespace relayrd::aux {

// One optimizable conditional block p(outputs | parents). Parents may be base
// source variables or outputs of earlier slots; outputs are new variables.
// A slot whose outputs all have cardinality 1 is informationless and acts as
// a structural pin.
struct ChannelSlot {
  std::string name;
  prob::Labels outputs;
  std::vector<int> out_sizes;
  prob::Labels parents;
};

// One conditional mutual-information term weight * I(a ; b | given) over the
// extended joint (base variables plus all slot outputs).
struct MiTerm {
  prob::Labels a;
  prob::Labels b;
  prob::Labels given;
  double weight = 1.0;
};

// A named rate coordinate: the sum of its terms.
struct RateExpr {
  std::string name;
  std::vector<MiTerm> terms;
};

// A reconstruction requirement: a deterministic decoder over `context` must
// bring E d(target, recon) under `budget`. Decoders are re-derived in closed
// form whenever the channels move.
struct DistortionConstraint {
  std::string name;
  std::string target;
  prob::Labels context;
  rd::DistortionMeasure d;
  double budget = 0.0;
};

struct AuxProblem {
  prob::JointSource base;
  std::vector<ChannelSlot> slots;
  std::vector<RateExpr> rates;
  std::vector<DistortionConstraint> constraints;
};

struct AuxSolution {
  std::vector<double> rate_values;            // one per RateExpr, bits
  std::vector<double> distortions;            // one per constraint
  std::vector<std::vector<double>> channels;  // per slot, parent-major rows
  std::vector<rd::DecoderMap> decoders;       // one per constraint
  double objective = 0.0;                     // weighted rate sum at the solution
  bool feasible = false;
};

// A complete assignment of all slots, used for warm starts.
using ChannelSet = std::vector<std::vector<double>>;

// Evaluation engine for a fixed problem structure. Precomputes all index maps
// once; evaluations are const and thread-safe.
class AuxEvaluator {
 public:
  explicit AuxEvaluator(AuxProblem problem);

  const AuxProblem& problem() const { return problem_; }
  std::size_t joint_cells() const { return n_omega_; }
  // Row/column geometry of slot k.
  std::size_t slot_rows(std::size_t k) const { return slot_rows_[k]; }
  std::size_t slot_cols(std::size_t k) const { return slot_cols_[k]; }

  // Rates, constraint distortions, and decoders for a channel assignment.
  void evaluate(const ChannelSet& channels, std::vector<double>& rates,
                std::vector<double>& dists) const;
  std::vector<rd::DecoderMap> decoders_for(const ChannelSet& channels) const;

  // Uniform rows for every slot.
  ChannelSet uniform_channels() const;
  // Near-deterministic rows concentrated on output 0 (epsilon-smoothed so
  // multiplicative updates can leave the corner).
  ChannelSet corner_channels(double epsilon = 1e-3) const;

 private:
  friend class AuxMinimizer;

  void build_joint(const ChannelSet& channels, std::vector<double>& p) const;
  void joint_without(const ChannelSet& channels, std::size_t k, std::vector<double>& p) const;

  AuxProblem problem_;
  prob::Labels all_labels_;
  std::vector<int> all_sizes_;
  std::size_t n_omega_ = 0;
  std::vector<double> base_of_omega_;  // base pmf spread over the extended space

  std::vector<std::size_t> slot_rows_, slot_cols_;
  std::vector<std::vector<int>> slot_row_of_, slot_col_of_;  // per slot, per omega

  struct TermMaps {
    double weight = 1.0;
    std::size_t n_ac = 0, n_bc = 0, n_abc = 0, n_c = 0;
    std::vector<int> ac_of, bc_of, abc_of, c_of;  // per omega
  };
  // Term maps grouped per rate expression.
  std::vector<std::vector<TermMaps>> rate_terms_;

  struct ConstraintMaps {
    std::size_t n_ctx = 0;
    int n_src = 0, n_recon = 0;
    std::vector<int> ctx_of, tgt_of;  // per omega
    std::vector<int> ctx_sizes;
  };
  std::vector<ConstraintMaps> constraint_maps_;
};

// Weighted-sum minimizer over all slots: exponentiated-gradient block descent
// with backtracking line search (descent-only accepts), hinge penalties with
// continuation over cfg.penalty_schedule, deterministic plus seeded restarts.
class AuxMinimizer {
 public:
  explicit AuxMinimizer(const AuxEvaluator& eval) : eval_(eval) {}

  // Minimizes sum_r rate_weights[r] * rate_r subject to the constraints.
  // Extra warm starts join the standard deterministic and seeded inits.
  AuxSolution minimize(const std::vector<double>& rate_weights, const rd::SolverConfig& cfg,
                       const std::vector<ChannelSet>& warm_starts = {}) const;

 private:
  struct RunResult {
    double objective = std::numeric_limits<double>::infinity();
    ChannelSet channels;
    bool feasible = false;
  };
  RunResult run_descent(const std::vector<double>& rate_weights, const rd::SolverConfig& cfg,
                        ChannelSet start) const;

  const AuxEvaluator& eval_;
};

// Rates/distortions of a fixed channel assignment under `problem`'s terms.
AuxSolution evaluate_at(const AuxEvaluator& eval, const ChannelSet& channels);

}  // namespace relayrd::aux
