#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "scaled_poisson/errors.hpp"

namespace scaled_poisson {

// A probability known only up to a one-sided defect: the true value lies in [lower, upper].
struct ProbabilityInterval {
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] double width() const { return upper - lower; }
  [[nodiscard]] bool contains(double p) const { return lower <= p && p <= upper; }
};

// Truncated pmf on {0, 1, ..., support_max}. The missing mass (at most mass_deficit)
// sits somewhere above the table, so upper tails are under-reported by at most the
// deficit and the cdf is under-reported by at most the deficit.
class LatticeDistribution {
 public:
  LatticeDistribution() : pmf_{1.0} { rebuild_sums(); }

  explicit LatticeDistribution(std::vector<double> pmf, double mass_deficit = 0.0)
      : pmf_(std::move(pmf)), deficit_(mass_deficit) {
    if (pmf_.empty()) throw ValidationError("LatticeDistribution: empty pmf table");
    if (!(deficit_ >= 0.0)) throw ValidationError("LatticeDistribution: negative mass deficit");
    for (double p : pmf_)
      if (!(p >= 0.0)) throw ValidationError("LatticeDistribution: negative or NaN pmf entry");
    rebuild_sums();
  }

  // Point mass at zero.
  static LatticeDistribution delta_zero() { return {}; }

  [[nodiscard]] std::int64_t support_max() const { return static_cast<std::int64_t>(pmf_.size()) - 1; }
  [[nodiscard]] double mass_deficit() const { return deficit_; }
  [[nodiscard]] std::span<const double> pmf() const { return pmf_; }

  [[nodiscard]] double pmf(std::int64_t x) const {
    if (x < 0 || x > support_max()) return 0.0;
    return pmf_[static_cast<std::size_t>(x)];
  }

  [[nodiscard]] double total_mass() const { return prefix_.back(); }

  // Sum of table entries at points >= t, accumulated from the far end.
  [[nodiscard]] double table_tail_ge(std::int64_t t) const {
    if (t <= 0) return suffix_.front();
    if (t > support_max()) return 0.0;
    return suffix_[static_cast<std::size_t>(t)];
  }

  // Sum of table entries at points <= t.
  [[nodiscard]] double table_cdf(std::int64_t t) const {
    if (t < 0) return 0.0;
    if (t >= support_max()) return prefix_.back();
    return prefix_[static_cast<std::size_t>(t)];
  }

  [[nodiscard]] ProbabilityInterval tail_ge(std::int64_t t) const {
    if (t <= 0) return {1.0, 1.0};
    const double lo = table_tail_ge(t);
    return {lo, std::min(1.0, lo + deficit_)};
  }
  [[nodiscard]] ProbabilityInterval tail_gt(std::int64_t t) const { return tail_ge(t + 1); }

  [[nodiscard]] ProbabilityInterval cdf(std::int64_t t) const {
    if (t < 0) return {0.0, 0.0};
    const double lo = table_cdf(t);
    return {lo, std::min(1.0, lo + deficit_)};
  }

  [[nodiscard]] double mean() const {
    double s = 0.0;
    for (std::size_t i = pmf_.size(); i-- > 0;) s += static_cast<double>(i) * pmf_[i];
    return s;
  }

  // Law of X + stride * Y for independent X ~ *this and Y ~ other.
  [[nodiscard]] LatticeDistribution convolve(const LatticeDistribution& other, std::int64_t stride = 1) const {
    if (stride < 1) throw ValidationError("convolve: stride must be positive");
    const auto s = static_cast<std::size_t>(stride);
    std::vector<double> out(pmf_.size() + s * (other.pmf_.size() - 1), 0.0);
    for (std::size_t j = 0; j < other.pmf_.size(); ++j) {
      const double q = other.pmf_[j];
      if (q == 0.0) continue;
      double* dst = out.data() + j * s;
      for (std::size_t i = 0; i < pmf_.size(); ++i) dst[i] += pmf_[i] * q;
    }
    // Missing mass of either factor may pair with anything from the other.
    const double deficit = deficit_ + other.deficit_;
    return LatticeDistribution(std::move(out), deficit);
  }

 private:
  void rebuild_sums() {
    prefix_.assign(pmf_.size(), 0.0);
    suffix_.assign(pmf_.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) prefix_[i] = acc += pmf_[i];
    acc = 0.0;
    for (std::size_t i = pmf_.size(); i-- > 0;) suffix_[i] = acc += pmf_[i];
  }

  std::vector<double> pmf_;
  double deficit_ = 0.0;
  std::vector<double> prefix_;
  std::vector<double> suffix_;
};

}  // namespace scaled_poisson
