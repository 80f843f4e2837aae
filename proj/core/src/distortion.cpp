#include "relayrd/distortion.hpp"

#include <algorithm>
#include <stdexcept>

namespace relayrd::rd {

DistortionMeasure::DistortionMeasure(int source_card, int recon_card, std::vector<double> values)
    : source_card_(source_card), recon_card_(recon_card), values_(std::move(values)) {
  if (source_card_ < 1 || recon_card_ < 1)
    throw std::invalid_argument("distortion alphabets must be >= 1");
  if (values_.size() != static_cast<std::size_t>(source_card_) * recon_card_)
    throw std::invalid_argument("distortion matrix length mismatch");
  for (double v : values_)
    if (v < 0.0) throw std::invalid_argument("negative distortion entry");
}

double DistortionMeasure::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

DistortionMeasure DistortionMeasure::hamming(int card) {
  std::vector<double> v(static_cast<std::size_t>(card) * card, 1.0);
  for (int i = 0; i < card; ++i) v[static_cast<std::size_t>(i) * card + i] = 0.0;
  return DistortionMeasure(card, card, std::move(v));
}

DecoderMap optimal_decoder(const prob::JointSource& js, const prob::Labels& context,
                           const std::string& source, const DistortionMeasure& d) {
  int src_pos = js.var_index(source);
  if (js.sizes()[src_pos] != d.source_card())
    throw std::invalid_argument("distortion source alphabet mismatch");
  std::vector<int> ctx_pos = js.positions_of(context);
  for (int p : ctx_pos)
    if (p == src_pos) throw std::invalid_argument("decoder context contains the source");

  std::vector<int> ctx_sizes;
  std::size_t n_ctx = 1;
  for (int p : ctx_pos) {
    ctx_sizes.push_back(js.sizes()[p]);
    n_ctx *= static_cast<std::size_t>(js.sizes()[p]);
  }
  int n_src = d.source_card();

  // joint mass of (context symbol, source symbol)
  std::vector<double> mass(n_ctx * static_cast<std::size_t>(n_src), 0.0);
  const auto& pmf = js.pmf();
  for (std::size_t idx = 0; idx < pmf.size(); ++idx) {
    if (pmf[idx] == 0.0) continue;
    std::size_t c = 0;
    for (std::size_t i = 0; i < ctx_pos.size(); ++i)
      c = c * static_cast<std::size_t>(ctx_sizes[i]) + js.symbol_at(idx, ctx_pos[i]);
    mass[c * n_src + js.symbol_at(idx, src_pos)] += pmf[idx];
  }

  DecoderMap out;
  out.context = context;
  out.context_sizes = ctx_sizes;
  out.recon.assign(n_ctx, 0);
  double total = 0.0;
  for (std::size_t c = 0; c < n_ctx; ++c) {
    double ctx_mass = 0.0;
    for (int x = 0; x < n_src; ++x) ctx_mass += mass[c * n_src + x];
    if (ctx_mass == 0.0) {
      out.recon[c] = 0;
      continue;
    }
    double best = 0.0;
    int best_j = 0;
    for (int j = 0; j < d.recon_card(); ++j) {
      double cost = 0.0;
      for (int x = 0; x < n_src; ++x) cost += mass[c * n_src + x] * d.at(x, j);
      if (j == 0 || cost < best) {
        best = cost;
        best_j = j;
      }
    }
    out.recon[c] = best_j;
    total += best;
  }
  out.distortion = total;
  return out;
}

double dmax(const prob::JointSource& js, const std::string& source, const prob::Labels& context,
            const DistortionMeasure& d) {
  return optimal_decoder(js, context, source, d).distortion;
}

}  // namespace relayrd::rd
