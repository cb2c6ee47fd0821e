#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ubhess {

// A trajectory on the dyadic grid {0, D, 2D, ..., T} with D = 2^-level.
// States are stored row-major: values[k * dim + c] is component c at time k*D.
struct GridPath {
  int level = 0;
  int dim = 1;
  std::vector<double> values;

  GridPath() = default;
  GridPath(int level, int dim, std::size_t horizon)
      : level(level), dim(dim), values(((horizon << level) + 1) * static_cast<std::size_t>(dim)) {}

  std::size_t steps_per_unit() const noexcept { return std::size_t{1} << level; }
  double delta() const noexcept { return 1.0 / static_cast<double>(steps_per_unit()); }
  std::size_t num_points() const noexcept { return values.size() / static_cast<std::size_t>(dim); }
  std::size_t horizon() const noexcept { return (num_points() - 1) / steps_per_unit(); }

  std::span<const double> state(std::size_t k) const noexcept {
    return {values.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::span<double> state(std::size_t k) noexcept {
    return {values.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  // State at integer time p (p = 0..horizon).
  std::span<const double> at_time(std::size_t p) const noexcept { return state(p * steps_per_unit()); }
};

// Exact bitwise equality of two paths (level, dimension and every stored bit).
bool bit_identical(const GridPath& a, const GridPath& b) noexcept;

// Observations y_1..y_n at integer times 1..n, row-major n x dim.
class ObservationSequence {
 public:
  ObservationSequence() = default;
  ObservationSequence(int dim, std::vector<double> values);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size() / static_cast<std::size_t>(dim_); }
  // Observation at time p + 1 (0-based index p).
  std::span<const double> operator[](std::size_t p) const noexcept {
    return {values_.data() + p * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& values() const noexcept { return values_; }

  ObservationSequence prefix(std::size_t n) const;

 private:
  int dim_ = 1;
  std::vector<double> values_;
};

}  // namespace ubhess
