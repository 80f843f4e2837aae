#include "relayrd/aux_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relayrd/errors.hpp"
#include "relayrd/parallel.hpp"
#include "relayrd/rng.hpp"

namespace relayrd::aux {

namespace {

constexpr double kLogClamp = 60.0;          // gradient log terms, bits
constexpr double kAcceptSlack = 1e-13;      // relative descent acceptance
constexpr std::size_t kJointGuard = 1u << 22;

double entropy_bits(const std::vector<double>& mass) {
  double h = 0.0;
  for (double m : mass)
    if (m > 1e-300) h -= m * std::log2(m);
  return h;
}

}  // namespace

// =============================================================================
// AuxEvaluator: structure and index maps
// =============================================================================

AuxEvaluator::AuxEvaluator(AuxProblem problem) : problem_(std::move(problem)) {
  
  all_labels_ = problem_.base.labels();
  all_sizes_ = problem_.base.sizes();
  for (const auto& slot : problem_.slots) {
    if (slot.outputs.size() != slot.out_sizes.size())
      throw std::invalid_argument("slot output/size count mismatch: " + slot.name);
    for (std::size_t i = 0; i < slot.outputs.size(); ++i) {
      for (const auto& l : all_labels_)
        if (l == slot.outputs[i])
          throw std::invalid_argument("slot output collides with label: " + slot.outputs[i]);
      if (slot.out_sizes[i] < 1) throw std::invalid_argument("slot output size must be >= 1");
      all_labels_.push_back(slot.outputs[i]);
      all_sizes_.push_back(slot.out_sizes[i]);
    }
  }

  n_omega_ = 1;
  for (int s : all_sizes_) {
    n_omega_ *= static_cast<std::size_t>(s);
    if (n_omega_ > kJointGuard) throw std::invalid_argument("extended joint alphabet too large");
  }
  std::vector<std::size_t> stride(all_sizes_.size(), 1);
  for (std::size_t i = all_sizes_.size(); i-- > 1;)
    stride[i - 1] = stride[i] * static_cast<std::size_t>(all_sizes_[i]);
  auto sym = [&](std::size_t omega, std::size_t pos) {
    return static_cast<int>((omega / stride[pos]) % static_cast<std::size_t>(all_sizes_[pos]));
  };
  auto position = [&](const std::string& label) -> std::size_t {
    for (std::size_t i = 0; i < all_labels_.size(); ++i)
      if (all_labels_[i] == label) return i;
    throw std::invalid_argument("unknown variable: " + label);
  };
  auto subindex_map = [&](const prob::Labels& labels, std::size_t& card) {
    std::vector<std::size_t> pos;
    for (const auto& l : labels) pos.push_back(position(l));
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    card = 1;
    for (std::size_t p : pos) card *= static_cast<std::size_t>(all_sizes_[p]);
    std::vector<int> map(n_omega_);
    for (std::size_t omega = 0; omega < n_omega_; ++omega) {
      std::size_t sub = 0;
      for (std::size_t p : pos) sub = sub * static_cast<std::size_t>(all_sizes_[p]) + sym(omega, p);
      map[omega] = static_cast<int>(sub);
    }
    return map;
  };

  // Base mass spread over the extended space: appended outputs are the least
  // significant digits, so the base cell is a plain division.
  std::size_t n_aux = 1;
  for (std::size_t i = problem_.base.sizes().size(); i < all_sizes_.size(); ++i)
    n_aux *= static_cast<std::size_t>(all_sizes_[i]);
  base_of_omega_.resize(n_omega_);
  for (std::size_t omega = 0; omega < n_omega_; ++omega)
    base_of_omega_[omega] = problem_.base.pmf()[omega / n_aux];

  // Slot geometry. Parents must precede the slot's own outputs.
  std::size_t seen_vars = problem_.base.labels().size();
  for (const auto& slot : problem_.slots) {
    std::vector<std::size_t> par_pos, out_pos;
    for (const auto& l : slot.parents) {
      std::size_t p = position(l);
      if (p >= seen_vars + slot.outputs.size())
        throw std::invalid_argument("slot parent declared after slot: " + l);
      if (p >= seen_vars) throw std::invalid_argument("slot cannot parent its own output: " + l);
      par_pos.push_back(p);
    }
    for (const auto& l : slot.outputs) out_pos.push_back(position(l));
    seen_vars += slot.outputs.size();

    std::size_t rows = 1, cols = 1;
    for (std::size_t p : par_pos) rows *= static_cast<std::size_t>(all_sizes_[p]);
    for (std::size_t p : out_pos) cols *= static_cast<std::size_t>(all_sizes_[p]);
    slot_rows_.push_back(rows);
    slot_cols_.push_back(cols);
    std::vector<int> row_of(n_omega_), col_of(n_omega_);
    for (std::size_t omega = 0; omega < n_omega_; ++omega) {
      std::size_t r = 0, c = 0;
      for (std::size_t p : par_pos) r = r * static_cast<std::size_t>(all_sizes_[p]) + sym(omega, p);
      for (std::size_t p : out_pos) c = c * static_cast<std::size_t>(all_sizes_[p]) + sym(omega, p);
      row_of[omega] = static_cast<int>(r);
      col_of[omega] = static_cast<int>(c);
    }
    slot_row_of_.push_back(std::move(row_of));
    slot_col_of_.push_back(std::move(col_of));
  }

  // Rate terms.
  for (const auto& rate : problem_.rates) {
    std::vector<TermMaps> maps;
    for (const auto& term : rate.terms) {
      TermMaps tm;
      tm.weight = term.weight;
      prob::Labels ac = term.a, bc = term.b, abc = term.a;
      for (const auto& l : term.given) ac.push_back(l);
      for (const auto& l : term.given) bc.push_back(l);
      for (const auto& l : term.b) abc.push_back(l);
      for (const auto& l : term.given) abc.push_back(l);
      tm.ac_of = subindex_map(ac, tm.n_ac);
      tm.bc_of = subindex_map(bc, tm.n_bc);
      tm.abc_of = subindex_map(abc, tm.n_abc);
      tm.c_of = subindex_map(term.given, tm.n_c);
      maps.push_back(std::move(tm));
    }
    rate_terms_.push_back(std::move(maps));
  }

  // Constraints.
  for (const auto& cons : problem_.constraints) {
    ConstraintMaps cm;
    std::size_t tgt = position(cons.target);
    cm.n_src = all_sizes_[tgt];
    cm.n_recon = cons.d.recon_card();
    if (cons.d.source_card() != cm.n_src)
      throw std::invalid_argument("distortion table does not match target alphabet: " + cons.name);
    std::size_t card = 0;
    cm.ctx_of = subindex_map(cons.context, card);
    cm.n_ctx = card;
    for (const auto& l : cons.context)
      cm.ctx_sizes.push_back(all_sizes_[position(l)]);
    cm.tgt_of.resize(n_omega_);
    for (std::size_t omega = 0; omega < n_omega_; ++omega)
      cm.tgt_of[omega] = sym(omega, tgt);
    constraint_maps_.push_back(std::move(cm));
  }
}

void AuxEvaluator::build_joint(const ChannelSet& channels, std::vector<double>& p) const {
  p.assign(n_omega_, 0.0);
  for (std::size_t omega = 0; omega < n_omega_; ++omega) {
    double v = base_of_omega_[omega];
    if (v == 0.0) continue;
    for (std::size_t k = 0; k < problem_.slots.size(); ++k)
      v *= channels[k][static_cast<std::size_t>(slot_row_of_[k][omega]) * slot_cols_[k] +
                      static_cast<std::size_t>(slot_col_of_[k][omega])];
    p[omega] = v;
  }
}

void AuxEvaluator::joint_without(const ChannelSet& channels, std::size_t skip,
                                 std::vector<double>& p) const {
  p.assign(n_omega_, 0.0);
  for (std::size_t omega = 0; omega < n_omega_; ++omega) {
    double v = base_of_omega_[omega];
    if (v == 0.0) continue;
    for (std::size_t k = 0; k < problem_.slots.size(); ++k) {
      if (k == skip) continue;
      v *= channels[k][static_cast<std::size_t>(slot_row_of_[k][omega]) * slot_cols_[k] +
                      static_cast<std::size_t>(slot_col_of_[k][omega])];
    }
    p[omega] = v;
  }
}

void AuxEvaluator::evaluate(const ChannelSet& channels, std::vector<double>& rates,
                            std::vector<double>& dists) const {
  std::vector<double> p;
  build_joint(channels, p);
  rates.assign(problem_.rates.size(), 0.0);
  for (std::size_t r = 0; r < rate_terms_.size(); ++r) {
    for (const auto& tm : rate_terms_[r]) {
      std::vector<double> m_ac(tm.n_ac, 0.0), m_bc(tm.n_bc, 0.0), m_abc(tm.n_abc, 0.0),
          m_c(std::max<std::size_t>(tm.n_c, 1), 0.0);
      for (std::size_t omega = 0; omega < n_omega_; ++omega) {
        double v = p[omega];
        if (v == 0.0) continue;
        m_ac[tm.ac_of[omega]] += v;
        m_bc[tm.bc_of[omega]] += v;
        m_abc[tm.abc_of[omega]] += v;
        m_c[tm.n_c ? tm.c_of[omega] : 0] += v;
      }
      double value = entropy_bits(m_ac) + entropy_bits(m_bc) - entropy_bits(m_abc) -
                     (tm.n_c ? entropy_bits(m_c) : 0.0);
      if (value < 0.0) value = 0.0;
      rates[r] += tm.weight * value;
    }
  }
  dists.assign(problem_.constraints.size(), 0.0);
  for (std::size_t c = 0; c < constraint_maps_.size(); ++c) {
    const ConstraintMaps& cm = constraint_maps_[c];
    std::vector<double> mass(cm.n_ctx * static_cast<std::size_t>(cm.n_src), 0.0);
    for (std::size_t omega = 0; omega < n_omega_; ++omega) {
      double v = p[omega];
      if (v == 0.0) continue;
      mass[static_cast<std::size_t>(cm.ctx_of[omega]) * cm.n_src + cm.tgt_of[omega]] += v;
    }
    double total = 0.0;
    for (std::size_t ctx = 0; ctx < cm.n_ctx; ++ctx) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < cm.n_recon; ++j) {
        double cost = 0.0;
        for (int s = 0; s < cm.n_src; ++s)
          cost += mass[ctx * static_cast<std::size_t>(cm.n_src) + s] * problem_.constraints[c].d.at(s, j);
        best = std::min(best, cost);
      }
      total += best;
    }
    dists[c] = total;
  }
}

std::vector<rd::DecoderMap> AuxEvaluator::decoders_for(const ChannelSet& channels) const {
  std::vector<double> p;
  build_joint(channels, p);
  std::vector<rd::DecoderMap> out;
  for (std::size_t c = 0; c < constraint_maps_.size(); ++c) {
    const ConstraintMaps& cm = constraint_maps_[c];
    std::vector<double> mass(cm.n_ctx * static_cast<std::size_t>(cm.n_src), 0.0);
    for (std::size_t omega = 0; omega < n_omega_; ++omega) {
      double v = p[omega];
      if (v == 0.0) continue;
      mass[static_cast<std::size_t>(cm.ctx_of[omega]) * cm.n_src + cm.tgt_of[omega]] += v;
    }
    rd::DecoderMap dm;
    dm.context = problem_.constraints[c].context;
    dm.context_sizes = cm.ctx_sizes;
    dm.recon.resize(cm.n_ctx);
    double total = 0.0;
    for (std::size_t ctx = 0; ctx < cm.n_ctx; ++ctx) {
      int best_j = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < cm.n_recon; ++j) {
        double cost = 0.0;
        for (int s = 0; s < cm.n_src; ++s)
          cost += mass[ctx * static_cast<std::size_t>(cm.n_src) + s] * problem_.constraints[c].d.at(s, j);
        if (cost < best) {
          best = cost;
          best_j = j;
        }
      }
      dm.recon[ctx] = best_j;
      total += best;
    }
    dm.distortion = total;
    out.push_back(std::move(dm));
  }
  return out;
}

ChannelSet AuxEvaluator::uniform_channels() const {
  ChannelSet out;
  for (std::size_t k = 0; k < problem_.slots.size(); ++k) {
    out.emplace_back(slot_rows_[k] * slot_cols_[k], 1.0 / static_cast<double>(slot_cols_[k]));
  }
  return out;
}

ChannelSet AuxEvaluator::corner_channels(double epsilon) const {
  ChannelSet out;
  for (std::size_t k = 0; k < problem_.slots.size(); ++k) {
    std::size_t cols = slot_cols_[k];
    std::vector<double> rows(slot_rows_[k] * cols, cols > 1 ? epsilon : 1.0);
    if (cols > 1) {
      double head = 1.0 - epsilon * static_cast<double>(cols - 1);
      for (std::size_t r = 0; r < slot_rows_[k]; ++r) rows[r * cols] = head;
    }
    out.push_back(std::move(rows));
  }
  return out;
}

// =============================================================================
// AuxMinimizer: penalized block descent
// =============================================================================

namespace {

struct Objective {
  double penalized = 0.0;
  double rate_part = 0.0;
  bool feasible = false;
};

Objective penalized_objective(const AuxEvaluator& eval, const std::vector<double>& weights,
                              const ChannelSet& channels, double mu, std::vector<double>& rates,
                              std::vector<double>& dists) {
  eval.evaluate(channels, rates, dists);
  Objective obj;
  obj.rate_part = 0.0;
  for (std::size_t r = 0; r < rates.size(); ++r) obj.rate_part += weights[r] * rates[r];
  obj.penalized = obj.rate_part;
  obj.feasible = true;
  const auto& cons = eval.problem().constraints;
  for (std::size_t c = 0; c < dists.size(); ++c) {
    double excess = dists[c] - cons[c].budget;
    if (excess > rd::kDistortionSlack) obj.feasible = false;
    if (excess > 0.0) obj.penalized += mu * excess;
  }
  return obj;
}

}  // namespace

AuxMinimizer::RunResult AuxMinimizer::run_descent(const std::vector<double>& rate_weights,
                                                  const rd::SolverConfig& cfg,
                                                  ChannelSet start) const {
  const AuxProblem& problem = eval_.problem();
  const std::size_t n_slots = problem.slots.size();
  ChannelSet channels = std::move(start);
  std::vector<double> rates, dists;

  RunResult best;
  auto consider = [&](const Objective& obj) {
    if (obj.feasible && obj.rate_part < best.objective) {
      best.objective = obj.rate_part;
      best.channels = channels;
      best.feasible = true;
    }
  };

  std::vector<double> p, p_mk, grad;
  for (double mu : cfg.penalty_schedule) {
    std::vector<double> eta(n_slots, 1.0);
    Objective cur = penalized_objective(eval_, rate_weights, channels, mu, rates, dists);
    consider(cur);
    for (int sweep = 0; sweep < cfg.max_iterations; ++sweep) {
      bool improved = false;
      for (std::size_t k = 0; k < n_slots; ++k) {
        std::size_t rows_k = eval_.slot_rows(k), cols_k = eval_.slot_cols(k);
        if (cols_k <= 1) continue;

        // Gradient of the penalized objective in the slot's cells.
        eval_.build_joint(channels, p);
        eval_.joint_without(channels, k, p_mk);
        std::vector<double> cell_grad(eval_.joint_cells(), 0.0);
        for (std::size_t r = 0; r < eval_.rate_terms_.size(); ++r) {
          double w = rate_weights[r];
          if (w == 0.0) continue;
          for (const auto& tm : eval_.rate_terms_[r]) {
            std::vector<double> m_ac(tm.n_ac, 0.0), m_bc(tm.n_bc, 0.0), m_abc(tm.n_abc, 0.0),
                m_c(std::max<std::size_t>(tm.n_c, 1), 0.0);
            for (std::size_t omega = 0; omega < eval_.joint_cells(); ++omega) {
              double v = p[omega];
              if (v == 0.0) continue;
              m_ac[tm.ac_of[omega]] += v;
              m_bc[tm.bc_of[omega]] += v;
              m_abc[tm.abc_of[omega]] += v;
              m_c[tm.n_c ? tm.c_of[omega] : 0] += v;
            }
            double total = m_c.empty() ? 1.0 : 0.0;
            for (double v : m_c) total += v;
            for (std::size_t omega = 0; omega < eval_.joint_cells(); ++omega) {
              if (p_mk[omega] == 0.0) continue;
              double abc = m_abc[tm.abc_of[omega]];
              double ac = m_ac[tm.ac_of[omega]];
              double bc = m_bc[tm.bc_of[omega]];
              double cmass = tm.n_c ? m_c[tm.c_of[omega]] : total;
              double g;
              if (abc <= 1e-300 || ac <= 1e-300 || bc <= 1e-300 || cmass <= 1e-300) {
                g = -kLogClamp;
              } else {
                g = std::log2(abc * cmass / (ac * bc));
                g = std::clamp(g, -kLogClamp, kLogClamp);
              }
              cell_grad[omega] += w * tm.weight * g;
            }
          }
        }
        // Active hinge terms use the current best decoders.
        std::vector<rd::DecoderMap> decs = eval_.decoders_for(channels);
        for (std::size_t c = 0; c < eval_.constraint_maps_.size(); ++c) {
          if (decs[c].distortion <= problem.constraints[c].budget) continue;
          const auto& cm = eval_.constraint_maps_[c];
          for (std::size_t omega = 0; omega < eval_.joint_cells(); ++omega) {
            if (p_mk[omega] == 0.0) continue;
            int j = decs[c].recon[cm.ctx_of[omega]];
            cell_grad[omega] += mu * problem.constraints[c].d.at(cm.tgt_of[omega], j);
          }
        }

        grad.assign(rows_k * cols_k, 0.0);
        for (std::size_t omega = 0; omega < eval_.joint_cells(); ++omega) {
          if (p_mk[omega] == 0.0 || cell_grad[omega] == 0.0) continue;
          grad[static_cast<std::size_t>(eval_.slot_row_of_[k][omega]) * cols_k +
               static_cast<std::size_t>(eval_.slot_col_of_[k][omega])] +=
              p_mk[omega] * cell_grad[omega];
        }

        // Multiplicative step with backtracking.
        double step = std::min(eta[k] * 2.0, 1e6);
        bool accepted = false;
        for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
          std::vector<double> trial_rows(rows_k * cols_k);
          for (std::size_t r = 0; r < rows_k; ++r) {
            double lo = std::numeric_limits<double>::infinity();
            for (std::size_t o = 0; o < cols_k; ++o) lo = std::min(lo, grad[r * cols_k + o]);
            double total = 0.0;
            for (std::size_t o = 0; o < cols_k; ++o) {
              double v = channels[k][r * cols_k + o] *
                         std::exp(-step * (grad[r * cols_k + o] - lo));
              trial_rows[r * cols_k + o] = v;
              total += v;
            }
            if (total <= 0.0) {
              for (std::size_t o = 0; o < cols_k; ++o)
                trial_rows[r * cols_k + o] = channels[k][r * cols_k + o];
            } else {
              for (std::size_t o = 0; o < cols_k; ++o) trial_rows[r * cols_k + o] /= total;
            }
          }
          std::vector<double> saved = std::move(channels[k]);
          channels[k] = std::move(trial_rows);
          Objective trial = penalized_objective(eval_, rate_weights, channels, mu, rates, dists);
          if (trial.penalized < cur.penalized - kAcceptSlack * (1.0 + std::abs(cur.penalized))) {
            cur = trial;
            consider(cur);
            eta[k] = step;
            accepted = true;
            improved = true;
          } else {
            channels[k] = std::move(saved);
            step *= 0.5;
          }
        }
        if (!accepted) eta[k] = std::max(eta[k] * 0.5, 1e-9);
      }
      if (!improved) break;
    }
  }
  if (!best.feasible) {
    best.channels = channels;
    best.objective = std::numeric_limits<double>::infinity();
  }
  return best;
}

AuxSolution AuxMinimizer::minimize(const std::vector<double>& rate_weights,
                                   const rd::SolverConfig& cfg,
                                   const std::vector<ChannelSet>& warm_starts) const {
  if (rate_weights.size() != eval_.problem().rates.size())
    throw std::invalid_argument("rate weight count mismatch");

  std::vector<ChannelSet> inits;
  inits.push_back(eval_.uniform_channels());
  inits.push_back(eval_.corner_channels());
  for (const auto& w : warm_starts) inits.push_back(w);
  std::size_t total = std::max<std::size_t>(static_cast<std::size_t>(std::max(cfg.restarts, 1)),
                                            inits.size());
  while (inits.size() < total) {
    SplitMix64 rng(cfg.seed + static_cast<std::uint64_t>(inits.size()));
    ChannelSet cs;
    for (std::size_t k = 0; k < eval_.problem().slots.size(); ++k) {
      std::size_t rows = eval_.slot_rows(k), cols = eval_.slot_cols(k);
      std::vector<double> mat(rows * cols);
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row = rng.dirichlet(cols);
        for (std::size_t o = 0; o < cols; ++o) mat[r * cols + o] = row[o];
      }
      cs.push_back(std::move(mat));
    }
    inits.push_back(std::move(cs));
  }

  std::vector<RunResult> results(inits.size());
  run_indexed(inits.size(), cfg.threads, [&](std::size_t i) {
    results[i] = run_descent(rate_weights, cfg, inits[i]);
  });

  std::size_t best_i = inits.size();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].feasible) continue;
    if (best_i == inits.size() || results[i].objective < results[best_i].objective) best_i = i;
  }
  if (best_i == inits.size())
    throw InfeasibleError("no feasible channel assignment met the distortion budgets");

  AuxSolution sol = evaluate_at(eval_, results[best_i].channels);
  sol.objective = 0.0;
  for (std::size_t r = 0; r < rate_weights.size(); ++r)
    sol.objective += rate_weights[r] * sol.rate_values[r];
  return sol;
}

AuxSolution evaluate_at(const AuxEvaluator& eval, const ChannelSet& channels) {
  AuxSolution out;
  eval.evaluate(channels, out.rate_values, out.distortions);
  out.channels = channels;
  out.decoders = eval.decoders_for(channels);
  out.feasible = true;
  for (std::size_t c = 0; c < out.distortions.size(); ++c)
    if (out.distortions[c] > eval.problem().constraints[c].budget + rd::kDistortionSlack)
      out.feasible = false;
  out.objective = 0.0;
  for (double v : out.rate_values) out.objective += v;
  return out;
}

}  // namespace relayrd::aux
