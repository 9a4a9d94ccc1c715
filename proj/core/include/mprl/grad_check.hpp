#pragma once

#include <functional>

#include "mprl/tape.hpp"
#include "mprl/tensor.hpp"

namespace mprl {

/// Compare the reverse-mode gradient of f at x against central finite
/// differences. f builds whatever graph it likes on the tape it is given
/// and returns a scalar; it must read x by reference so in-place
/// perturbations are visible.
///
/// Returns max over elements of |analytic - numeric| / max(1, |analytic|).
double grad_check(const std::function<Tensor(Tape&, Tensor&)>& f, Tensor& x, double eps = 1e-5);

}  // namespace mprl
