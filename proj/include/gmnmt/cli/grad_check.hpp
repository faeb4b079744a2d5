#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmnmt/model/config.hpp"

namespace gmnmt {

enum class Ablation { None, NoInterModalFusion, FullyConnectedGrounding, UnifiedParameters, DecoderAttendVisual, DecoderAttendBoth };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& name);
std::vector<Ablation> all_ablations();

struct GradCheckOptions {
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  Ablation ablation = Ablation::None;
  double step = 1e-5;
};

struct GroupError {
  std::string group;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t scalars = 0;
};

struct GradCheckReport {
  Ablation ablation = Ablation::None;
  std::vector<GroupError> groups;
  bool passed = false;
  /// Largest error over all groups.
  GroupError worst;
};

/// Seeded toy model (d_model 8, 2 heads, two encoder and decoder layers,
/// 11-word vocabularies) on a two-example batch: analytic gradients of the
/// NLL versus central differences for every scalar parameter.
GradCheckReport run_grad_check(const GradCheckOptions& options);

/// Relative error with a floor on the denominator.
double grad_rel_error(double analytic, double numeric);

}  // namespace gmnmt
