#include "bevdebias/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "bevdebias/error.hpp"

namespace bevdebias {

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)),
      data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                            std::multiplies<>()),
            fill) {}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw DimensionError("tensor: index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (const std::size_t i : idx) {
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

Tensor Tensor::slice(std::size_t leading) const {
  if (shape_.empty() || leading >= shape_[0]) {
    throw DimensionError("tensor: slice index out of range");
  }
  Tensor out(std::vector<std::size_t>(shape_.begin() + 1, shape_.end()));
  const std::size_t n = out.size();
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(leading * n), n, out.data_.begin());
  return out;
}

}  // namespace bevdebias
