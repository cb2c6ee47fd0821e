#include "ubhess/grid_path.hpp"

#include <cstring>

#include "ubhess/errors.hpp"

namespace ubhess {

bool bit_identical(const GridPath& a, const GridPath& b) noexcept {
  return a.level == b.level && a.dim == b.dim && a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

ObservationSequence::ObservationSequence(int dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ < 1) throw ArgumentError("observation dimension must be >= 1");
  if (values_.empty() || values_.size() % static_cast<std::size_t>(dim_) != 0) {
    throw ArgumentError("observation sequence needs n >= 1 vectors of dimension " +
                        std::to_string(dim_));
  }
}

ObservationSequence ObservationSequence::prefix(std::size_t n) const {
  if (n == 0 || n > size()) throw ArgumentError("prefix length out of range");
  return ObservationSequence(
      dim_, std::vector<double>(values_.begin(), values_.begin() + n * static_cast<std::size_t>(dim_)));
}

}  // namespace ubhess
