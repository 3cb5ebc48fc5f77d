#pragma once

#include "tvx/fidelity.hpp"
#include "tvx/measures.hpp"
#include "tvx/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace tvx {

/// The measure that generated the data, and the seed of the noise realisation.
struct GroundTruth {
  DiscreteMeasure measure;
  std::uint64_t noise_seed = 0;
};

/// Operator, data and fidelity of one TV-regularised inverse problem.
struct Problem {
  MeasurementOperator op;
  QuadraticFidelity fidelity;
  std::optional<GroundTruth> truth;
  PointSet initial_grid;  // suggested starting grid; may be empty
  std::string name;

  const Domain& domain() const { return op.domain(); }
};

}  // namespace tvx
