#include "relayrd/rate_distortion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relayrd/errors.hpp"
#include "relayrd/wz_solver.hpp"

namespace relayrd::rd {

namespace {

constexpr double kLn2 = 0.6931471805599453;

// One Blahut pass family: exact solver for min I + slope * E d over the test
// channel of a single source distribution.
struct BlahutResult {
  std::vector<double> phi;  // p(j|x), x-major
  double rate = 0.0;        // bits
  double dist = 0.0;
};

BlahutResult blahut_at_slope(const std::vector<double>& q, const DistortionMeasure& d,
                             double slope_bits) {
  int nx = d.source_card();
  int nj = d.recon_card();
  double slope_nats = slope_bits * kLn2;
  std::vector<double> a(static_cast<std::size_t>(nx) * nj);
  for (int x = 0; x < nx; ++x) {
    double row_min = std::numeric_limits<double>::infinity();
    for (int j = 0; j < nj; ++j) row_min = std::min(row_min, d.at(x, j));
    for (int j = 0; j < nj; ++j)
      a[static_cast<std::size_t>(x) * nj + j] = std::exp(-slope_nats * (d.at(x, j) - row_min));
  }
  std::vector<double> w(nj, 1.0 / nj), w_new(nj, 0.0);
  std::vector<double> phi(static_cast<std::size_t>(nx) * nj, 0.0);
  for (int it = 0; it < 20000; ++it) {
    std::fill(w_new.begin(), w_new.end(), 0.0);
    for (int x = 0; x < nx; ++x) {
      if (q[x] == 0.0) continue;
      double sum = 0.0;
      for (int j = 0; j < nj; ++j) sum += w[j] * a[static_cast<std::size_t>(x) * nj + j];
      for (int j = 0; j < nj; ++j) {
        double p = w[j] * a[static_cast<std::size_t>(x) * nj + j] / sum;
        phi[static_cast<std::size_t>(x) * nj + j] = p;
        w_new[j] += q[x] * p;
      }
    }
    double delta = 0.0;
    for (int j = 0; j < nj; ++j) delta = std::max(delta, std::abs(w_new[j] - w[j]));
    w.swap(w_new);
    if (delta < 1e-15) break;
  }
  BlahutResult out;
  out.phi = phi;
  for (int x = 0; x < nx; ++x) {
    if (q[x] == 0.0) continue;
    for (int j = 0; j < nj; ++j) {
      double p = phi[static_cast<std::size_t>(x) * nj + j];
      if (p > 1e-300 && w[j] > 1e-300) out.rate += q[x] * p * std::log(p / w[j]);
      out.dist += q[x] * p * d.at(x, j);
    }
  }
  out.rate /= kLn2;
  if (out.rate < 0.0) out.rate = 0.0;
  return out;
}

// Conditional problem data: one sub-source per side symbol.
struct CondData {
  std::vector<double> p_s;                  // side weights
  std::vector<std::vector<double>> q_x_s;   // p(x|s)
  int nx = 0;
};

CondData cond_data(const prob::JointSource& js, const std::string& source,
                   const prob::Labels& side) {
  int src_pos = js.var_index(source);
  std::vector<int> side_pos = js.positions_of(side);
  for (int p : side_pos)
    if (p == src_pos) throw std::invalid_argument("side labels contain the source");
  CondData cd;
  cd.nx = js.sizes()[src_pos];
  std::size_t ns = 1;
  std::vector<int> side_sizes;
  for (int p : side_pos) {
    side_sizes.push_back(js.sizes()[p]);
    ns *= static_cast<std::size_t>(js.sizes()[p]);
  }
  cd.p_s.assign(ns, 0.0);
  cd.q_x_s.assign(ns, std::vector<double>(cd.nx, 0.0));
  const auto& pmf = js.pmf();
  for (std::size_t idx = 0; idx < pmf.size(); ++idx) {
    if (pmf[idx] == 0.0) continue;
    std::size_t s = 0;
    for (std::size_t i = 0; i < side_pos.size(); ++i)
      s = s * static_cast<std::size_t>(side_sizes[i]) + js.symbol_at(idx, side_pos[i]);
    cd.p_s[s] += pmf[idx];
    cd.q_x_s[s][js.symbol_at(idx, src_pos)] += pmf[idx];
  }
  for (std::size_t s = 0; s < ns; ++s) {
    if (cd.p_s[s] == 0.0) continue;
    for (int x = 0; x < cd.nx; ++x) cd.q_x_s[s][x] /= cd.p_s[s];
  }
  return cd;
}

struct CondSlopePoint {
  std::vector<std::vector<double>> phis;  // per side symbol
  double rate = 0.0, dist = 0.0;
};

CondSlopePoint cond_at_slope(const CondData& cd, const DistortionMeasure& d, double slope) {
  CondSlopePoint out;
  out.phis.resize(cd.p_s.size());
  for (std::size_t s = 0; s < cd.p_s.size(); ++s) {
    if (cd.p_s[s] == 0.0) {
      out.phis[s].assign(static_cast<std::size_t>(cd.nx) * d.recon_card(), 0.0);
      for (int x = 0; x < cd.nx; ++x) out.phis[s][static_cast<std::size_t>(x) * d.recon_card()] = 1.0;
      continue;
    }
    BlahutResult r = blahut_at_slope(cd.q_x_s[s], d, slope);
    out.rate += cd.p_s[s] * r.rate;
    out.dist += cd.p_s[s] * r.dist;
    out.phis[s] = std::move(r.phi);
  }
  return out;
}

// Shared budget logic for the convex solvers: slope bisection plus chordal
// interpolation between the final brackets.
struct ConvexBudgetResult {
  double rate = 0.0, dist = 0.0;
  CondSlopePoint representative;  // feasible-side solve
};

ConvexBudgetResult convex_budget(const CondData& cd, const DistortionMeasure& d, double budget,
                                 double d_zero_rate, double d_floor) {
  if (budget < 0.0) throw std::invalid_argument("negative distortion budget");
  if (budget < d_floor - 1e-9) throw InfeasibleError("distortion budget below the achievable floor");

  struct Entry {
    double slope;
    CondSlopePoint point;
  };
  auto solve = [&](double slope) { return Entry{slope, cond_at_slope(cd, d, slope)}; };

  Entry lo = solve(0.0);
  if (lo.point.dist <= budget + 1e-12) {
    // Zero slope already feasible (budget at or above the zero-rate regime).
    ConvexBudgetResult out;
    out.rate = 0.0;
    out.dist = std::min(lo.point.dist, d_zero_rate);
    out.representative = std::move(lo.point);
    out.representative.rate = 0.0;
    return out;
  }
  Entry hi = solve(1.0);
  while (hi.point.dist > budget + 1e-12) {
    lo = std::move(hi);
    double next = lo.slope * 4.0;
    if (next > 1e13) {
      if (lo.point.dist <= budget + 1e-9) break;
      throw InfeasibleError("distortion budget unreachable");
    }
    hi = solve(next);
    if (lo.point.dist - hi.point.dist < 1e-15 && hi.point.dist > budget + 1e-9 &&
        hi.slope > 1e9)
      throw InfeasibleError("distortion budget unreachable");
  }
  for (int round = 0; round < 200; ++round) {
    if (lo.point.dist - hi.point.dist < 1e-13) break;
    double mid_slope = lo.slope > 0.0 ? std::sqrt(lo.slope * hi.slope) : hi.slope / 2.0;
    if (mid_slope <= lo.slope * (1.0 + 1e-13) || mid_slope >= hi.slope * (1.0 - 1e-13)) break;
    Entry mid = solve(mid_slope);
    if (mid.point.dist > budget + 1e-12)
      lo = std::move(mid);
    else
      hi = std::move(mid);
  }
  ConvexBudgetResult out;
  double dl = lo.point.dist, dh = hi.point.dist;
  double rl = lo.point.rate, rh = hi.point.rate;
  if (dl <= budget + 1e-12 && rl <= rh) {
    out.rate = rl;
    out.dist = dl;
    out.representative = std::move(lo.point);
    return out;
  }
  if (dl - dh > 1e-15 && dl > budget && dh <= budget + 1e-12) {
    double t = (budget - dh) / (dl - dh);
    double chord = rh + t * (rl - rh);
    out.rate = std::min(chord, rh);
    out.dist = out.rate < rh - 1e-15 ? budget : dh;
  } else {
    out.rate = rh;
    out.dist = dh;
  }
  out.representative = std::move(hi.point);
  return out;
}

// Packs per-side test channels into one conditional channel with parents
// (source, side...).
prob::ConditionalChannel pack_cond_channel(const prob::JointSource& js, const std::string& source,
                                           const prob::Labels& side, const DistortionMeasure& d,
                                           const std::vector<std::vector<double>>& phis) {
  int nx = d.source_card();
  int nj = d.recon_card();
  std::size_t ns = phis.size();
  prob::Labels parents{source};
  std::vector<int> parent_sizes{nx};
  for (const auto& l : side) {
    parents.push_back(l);
    parent_sizes.push_back(js.sizes()[js.var_index(l)]);
  }
  std::vector<double> rows(static_cast<std::size_t>(nx) * ns * nj, 0.0);
  for (std::size_t s = 0; s < ns; ++s)
    for (int x = 0; x < nx; ++x)
      for (int j = 0; j < nj; ++j)
        rows[(static_cast<std::size_t>(x) * ns + s) * nj + j] =
            phis[s][static_cast<std::size_t>(x) * nj + j];
  return prob::ConditionalChannel({source + "_hat"}, {nj}, parents, parent_sizes, std::move(rows));
}

DecoderMap identity_decoder(const std::string& hat_label, int nj, double distortion) {
  DecoderMap dm;
  dm.context = {hat_label};
  dm.context_sizes = {nj};
  dm.recon.resize(nj);
  for (int j = 0; j < nj; ++j) dm.recon[j] = j;
  dm.distortion = distortion;
  return dm;
}

RDPoint cond_solve(const prob::JointSource& js, const std::string& source,
                   const prob::Labels& side, const DistortionMeasure& d, double budget) {
  CondData cd = cond_data(js, source, side);
  // Zero-rate distortion: best reconstruction from the side alone.
  double d_zero = 0.0;
  double d_floor = 0.0;
  for (std::size_t s = 0; s < cd.p_s.size(); ++s) {
    if (cd.p_s[s] == 0.0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d.recon_card(); ++j) {
      double cost = 0.0;
      for (int x = 0; x < cd.nx; ++x) cost += cd.q_x_s[s][x] * d.at(x, j);
      best = std::min(best, cost);
    }
    d_zero += cd.p_s[s] * best;
    double floor_s = 0.0;
    for (int x = 0; x < cd.nx; ++x) {
      double bx = std::numeric_limits<double>::infinity();
      for (int j = 0; j < d.recon_card(); ++j) bx = std::min(bx, d.at(x, j));
      floor_s += cd.q_x_s[s][x] * bx;
    }
    d_floor += cd.p_s[s] * floor_s;
  }
  RDPoint out;
  out.budget = budget;
  if (budget >= d_zero - 1e-12) {
    // The side alone meets the budget: describe nothing, reconstruct from
    // the per-symbol best letter.
    if (budget < 0.0) throw std::invalid_argument("negative distortion budget");
    std::vector<std::vector<double>> phis(cd.p_s.size());
    for (std::size_t s = 0; s < cd.p_s.size(); ++s) {
      int best_j = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < d.recon_card(); ++j) {
        double cost = 0.0;
        for (int x = 0; x < cd.nx; ++x)
          cost += (cd.p_s[s] > 0.0 ? cd.q_x_s[s][x] : (x == 0 ? 1.0 : 0.0)) * d.at(x, j);
        if (cost < best) {
          best = cost;
          best_j = j;
        }
      }
      phis[s].assign(static_cast<std::size_t>(cd.nx) * d.recon_card(), 0.0);
      for (int x = 0; x < cd.nx; ++x)
        phis[s][static_cast<std::size_t>(x) * d.recon_card() + best_j] = 1.0;
    }
    out.rate = 0.0;
    out.distortion = d_zero;
    out.feasible = true;
    out.channel = pack_cond_channel(js, source, side, d, phis);
    out.decoder = identity_decoder(source + "_hat", d.recon_card(), d_zero);
    return out;
  }
  ConvexBudgetResult r = convex_budget(cd, d, budget, d_zero, d_floor);
  out.rate = r.rate;
  out.distortion = std::min(r.dist, budget);
  out.feasible = true;
  out.channel = pack_cond_channel(js, source, side, d, r.representative.phis);
  out.decoder = identity_decoder(source + "_hat", d.recon_card(), out.distortion);
  return out;
}

prob::JointSource require_xyz(const prob::JointSource& js) {
  if (js.labels().size() < 3)
    throw std::invalid_argument("selector needs a source triple (X, Y, Z)");
  return js;
}

}  // namespace

RDPoint classical_rd(const prob::JointSource& js, const std::string& source,
                     const DistortionMeasure& d, double budget, const SolverConfig&) {
  return cond_solve(js, source, {}, d, budget);
}

RDPoint conditional_rd(const prob::JointSource& js, const std::string& source,
                       const prob::Labels& side, const DistortionMeasure& d, double budget,
                       const SolverConfig&) {
  return cond_solve(js, source, side, d, budget);
}

RDPoint wyner_ziv(const prob::JointSource& js, const std::string& source,
                  const prob::Labels& dec_side, const DistortionMeasure& d, double budget,
                  const SolverConfig& cfg) {
  WzSetup setup{js, {source}, dec_side, source, d, cfg.aux_cardinality, "U"};
  WzSolver solver(std::move(setup));
  return solver.solve_budget(budget, cfg);
}

RDPoint wz_star(const prob::JointSource& js, const std::string& source,
                const std::string& enc_side, const prob::Labels& dec_side,
                const DistortionMeasure& d, double budget, WzStarMode mode,
                const SolverConfig& cfg) {
  prob::Labels enc{source, enc_side};
  prob::Labels dec = dec_side;
  if (mode == WzStarMode::kEncoderAndDecoder) {
    bool present = false;
    for (const auto& l : dec) present = present || l == enc_side;
    if (!present) dec.push_back(enc_side);
  }
  WzSetup setup{js, enc, dec, source, d, cfg.aux_cardinality, "U"};
  WzSolver solver(std::move(setup));
  return solver.solve_budget(budget, cfg);
}

RdSelector rd_selector_from_name(const std::string& name) {
  if (name == "classical") return RdSelector::kClassical;
  if (name == "cond_y") return RdSelector::kConditionalY;
  if (name == "cond_yz") return RdSelector::kConditionalYZ;
  if (name == "wz_y") return RdSelector::kWzY;
  if (name == "wz_yz") return RdSelector::kWzYZ;
  if (name == "wz_star_enc") return RdSelector::kWzStarEnc;
  if (name == "wz_star_encdec") return RdSelector::kWzStarEncDec;
  throw std::invalid_argument("unknown rate function selector: " + name);
}

std::string rd_selector_name(RdSelector s) {
  switch (s) {
    case RdSelector::kClassical: return "classical";
    case RdSelector::kConditionalY: return "cond_y";
    case RdSelector::kConditionalYZ: return "cond_yz";
    case RdSelector::kWzY: return "wz_y";
    case RdSelector::kWzYZ: return "wz_yz";
    case RdSelector::kWzStarEnc: return "wz_star_enc";
    case RdSelector::kWzStarEncDec: return "wz_star_encdec";
  }
  return "unknown";
}

RDCurve rd_curve(RdSelector selector, const prob::JointSource& js_in, const DistortionMeasure& d,
                 const std::vector<double>& budgets, const SolverConfig& cfg) {
  const prob::JointSource& js = selector == RdSelector::kClassical ? js_in : require_xyz(js_in);
  const std::string x = js.labels()[0];
  std::string y, z;
  if (js.labels().size() >= 3) {
    y = js.labels()[1];
    z = js.labels()[2];
  }
  auto solve_one = [&](double budget) -> RDPoint {
    switch (selector) {
      case RdSelector::kClassical: return classical_rd(js, x, d, budget, cfg);
      case RdSelector::kConditionalY: return conditional_rd(js, x, {y}, d, budget, cfg);
      case RdSelector::kConditionalYZ: return conditional_rd(js, x, {y, z}, d, budget, cfg);
      case RdSelector::kWzY: return wyner_ziv(js, x, {y}, d, budget, cfg);
      case RdSelector::kWzYZ: return wyner_ziv(js, x, {y, z}, d, budget, cfg);
      case RdSelector::kWzStarEnc:
        return wz_star(js, x, z, {y}, d, budget, WzStarMode::kEncoderOnly, cfg);
      case RdSelector::kWzStarEncDec:
        return wz_star(js, x, z, {y}, d, budget, WzStarMode::kEncoderAndDecoder, cfg);
    }
    throw std::logic_error("unhandled selector");
  };

  RDCurve curve;
  curve.points.reserve(budgets.size());
  for (double b : budgets) {
    try {
      curve.points.push_back(solve_one(b));
    } catch (const InfeasibleError&) {
      RDPoint p;
      p.budget = b;
      p.rate = std::numeric_limits<double>::quiet_NaN();
      p.distortion = std::numeric_limits<double>::quiet_NaN();
      p.feasible = false;
      curve.points.push_back(std::move(p));
    }
  }

  // Convexify across the grid, then enforce a non-increasing profile.
  std::vector<std::pair<double, double>> pts;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (curve.points[i].feasible) {
      pts.emplace_back(curve.points[i].budget, curve.points[i].rate);
      idx.push_back(i);
    }
  }
  for (std::size_t k = 0; k < idx.size(); ++k) {
    double v = envelope_at(pts, pts[k].first, nullptr);
    RDPoint& p = curve.points[idx[k]];
    if (v < p.rate - 1e-15) {
      p.rate = v;
      p.distortion = p.budget;
    }
  }
  // Non-increasing in the budget: sort feasible indices by budget.
  std::vector<std::size_t> order = idx;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return curve.points[a].budget < curve.points[b].budget;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    RDPoint& prev = curve.points[order[k - 1]];
    RDPoint& cur = curve.points[order[k]];
    if (cur.rate > prev.rate) {
      cur.rate = prev.rate;
      cur.distortion = std::min(cur.budget, prev.distortion);
    }
  }
  curve.convexified = true;
  return curve;
}

}  // namespace relayrd::rd
