#pragma once

#include <span>
#include <string>

#include "natsel/model.hpp"
#include "natsel/tensor.hpp"

namespace natsel {

// Lowercase hex SHA-256 over the little-endian binary64 bytes of every
// parameter, in storage order. Equal digests mean bitwise-equal parameters.
std::string parameter_digest(std::span<const Tensor> parameters);
std::string parameter_digest(const Classifier& model);

}  // namespace natsel
