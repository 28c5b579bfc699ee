#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hevsim/errors.hpp"

namespace hevsim {

// One-dimensional piecewise-linear table with flat extrapolation beyond the
// first and last breakpoints. Breakpoints must be strictly increasing in x.
class PiecewiseLinear {
public:
  PiecewiseLinear() = default;

  PiecewiseLinear(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)) {
    validate();
  }

  PiecewiseLinear(std::initializer_list<double> xs, std::initializer_list<double> ys)
      : xs_(xs), ys_(ys) {
    validate();
  }

  static PiecewiseLinear constant(double y) { return PiecewiseLinear({0.0}, {y}); }

  double operator()(double x) const {
    const std::size_t n = xs_.size();
    if (x <= xs_.front()) return ys_.front();
    if (x >= xs_.back()) return ys_.back();
    std::size_t hi = 1;
    while (hi < n && xs_[hi] < x) ++hi;
    const double t = (x - xs_[hi - 1]) / (xs_[hi] - xs_[hi - 1]);
    return ys_[hi - 1] + t * (ys_[hi] - ys_[hi - 1]);
  }

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }

private:
  void validate() const {
    if (xs_.empty() || xs_.size() != ys_.size())
      throw ValidationError("piecewise-linear table needs matching non-empty x/y lists");
    for (std::size_t i = 1; i < xs_.size(); ++i)
      if (!(xs_[i] > xs_[i - 1]))
        throw ValidationError("piecewise-linear table breakpoints must be strictly increasing");
  }

  std::vector<double> xs_{0.0};
  std::vector<double> ys_{0.0};
};

}  // namespace hevsim
