#include "mprl/grad_check.hpp"

#include <cmath>
#include <vector>

#include "mprl/error.hpp"

namespace mprl {

double grad_check(const std::function<Tensor(Tape&, Tensor&)>& f, Tensor& x, double eps) {
  require(eps > 0.0, ErrorKind::Contract, "grad_check: eps must be positive");

  x.ensure_grad();
  x.zero_grad();
  {
    Tape tape;
    Tensor root = f(tape, x);
    tape.backward(root);
  }
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  x.zero_grad();

  auto eval = [&]() {
    Tape tape;
    return f(tape, x).item();
  };

  double worst = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    double saved = x.data()[i];
    x.data()[i] = saved + eps;
    double fp = eval();
    x.data()[i] = saved - eps;
    double fm = eval();
    x.data()[i] = saved;
    double numeric = (fp - fm) / (2.0 * eps);
    double a = analytic[static_cast<size_t>(i)];
    double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mprl
