#pragma once

#include "tvx/exchange.hpp"
#include "tvx/sliding.hpp"

namespace tvx {

struct HybridConfig {
  ExchangeConfig exchange;
  SlideConfig slide;
  bool slide_every = true;
  // Re-solve the amplitudes on the slid positions before the next certificate.
  bool refit = true;
  // Add the slid positions to the next grid.
  bool feed_back = true;
  // Atoms closer than this (relative to diam) are counted once in MetricsRow::atoms.
  double count_merge_radius = 1e-4;
  // Atoms with |a| <= count_prune * max |a| are not counted.
  double count_prune = 1e-6;
};

struct HybridResult {
  DiscreteMeasure measure;  // best measure seen
  Vector dual;              // -grad f at the reported measure
  std::vector<MetricsRow> history;
  std::vector<SlideResult> slides;
  std::vector<Vector> duals;                  // grid duals q_k
  std::vector<PointSet> maximizers;           // X_k
  std::vector<DiscreteMeasure> hat_measures;  // solutions on X_k
  ExchangeState final_state;
  bool flagged = false;
};

/// Number of atoms after merging within `radius` and dropping relatively small amplitudes.
long count_atoms(const DiscreteMeasure& mu, double radius, double relative_prune);

HybridResult run_hybrid(const Problem& problem, const HybridConfig& cfg, const Reference* reference = nullptr);

}  // namespace tvx
