#pragma once

#include <string>
#include <vector>

#include "relayrd/distortion.hpp"
#include "relayrd/probability.hpp"

namespace relayrd::rd {

// Classical rate-distortion of the source variable, no side information.
// Reports the convexified value at the budget; throws InfeasibleError when
// the budget lies below the achievable floor.
RDPoint classical_rd(const prob::JointSource& js, const std::string& source,
                     const DistortionMeasure& d, double budget, const SolverConfig& cfg = {});

// Rate-distortion with the side variables known at both encoder and decoder.
// Solved as per-side-symbol subproblems sharing one Lagrange slope.
RDPoint conditional_rd(const prob::JointSource& js, const std::string& source,
                       const prob::Labels& side, const DistortionMeasure& d, double budget,
                       const SolverConfig& cfg = {});

// Side information at the decoder only: minimize I(source; U | dec_side) over
// p(u | source) with decoder psi(u, dec_side).
RDPoint wyner_ziv(const prob::JointSource& js, const std::string& source,
                  const prob::Labels& dec_side, const DistortionMeasure& d, double budget,
                  const SolverConfig& cfg = {});

enum class WzStarMode {
  kEncoderOnly,      // relay observation at the encoder only
  kEncoderAndDecoder // relay observation at both ends
};

// Switch variants with the extra observation enc_side available to the
// encoder. kEncoderOnly charges I(source, enc_side; U | dec_side) with
// decoder psi(u, dec_side); kEncoderAndDecoder adds enc_side to the decoder
// context, making the rate I(source; U | dec_side, enc_side).
RDPoint wz_star(const prob::JointSource& js, const std::string& source,
                const std::string& enc_side, const prob::Labels& dec_side,
                const DistortionMeasure& d, double budget, WzStarMode mode,
                const SolverConfig& cfg = {});

// Switch-family selector over a source triple (X, Y, Z) = the first three
// labels of the joint. Conditional variants place the side at both ends; the
// wz variants at the decoder only.
enum class RdSelector {
  kClassical,
  kConditionalY,
  kConditionalYZ,
  kWzY,
  kWzYZ,
  kWzStarEnc,
  kWzStarEncDec
};

RdSelector rd_selector_from_name(const std::string& name);
std::string rd_selector_name(RdSelector s);

// Evaluates the selected function over the budget grid, then applies the
// lower convex envelope and enforces a non-increasing profile.
RDCurve rd_curve(RdSelector selector, const prob::JointSource& js, const DistortionMeasure& d,
                 const std::vector<double>& budgets, const SolverConfig& cfg = {});

}  // namespace relayrd::rd
