#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "jmls/model.hpp"

namespace jmls {

/// Observed sequence u_{1:N}, y_{1:N} with optional ground truth. Rows are
/// time steps; mode indices are 0-based in memory and 1-based in files.
struct Dataset {
  Matrix u;  // N x nu
  Matrix y;  // N x ny
  /// (N+1) x nx when produced by simulate(); N x nx when read from CSV.
  std::optional<Matrix> x;
  std::optional<std::vector<std::size_t>> z;
  std::uint64_t seed = 0;
  Convention convention = Convention::dynamic;

  Index length() const { return y.rows(); }
  Index nu() const { return u.cols(); }
  Index ny() const { return y.cols(); }
};

enum class InputLaw { iid_normal, zero, given };

struct InputSpec {
  InputLaw law = InputLaw::iid_normal;
  Matrix u;  // used when law == given; N x nu
};

/// Draws a trajectory. The prior sample is x_1 (the first stored state), so
/// a run that starts "from x_0 = 0" corresponds to a prior concentrated at
/// zero with the first transition already applied.
///
/// Draw order for a fixed seed: all iid inputs (row-major), the prior
/// component, the prior state, then per step k: z_{k+1}, then the joint
/// noise vector of length ny + nx.
Dataset simulate(const JmlsModel& model, const InputSpec& inputs, Index N, std::uint64_t seed);

/// Transition input u_bar for the step x_k -> x_{k+1}: [u_k; y_k] under the
/// dynamic convention, [u_{k+1}; y_k] under the classic one (u_{N+1} = 0).
Vector transition_input(const Dataset& data, Convention convention, Index k);

void check_dimensions(const JmlsModel& model, const Dataset& data);

}  // namespace jmls
