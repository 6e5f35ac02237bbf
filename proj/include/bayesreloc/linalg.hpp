#pragma once

#include <cstddef>
#include <span>

namespace bayesreloc {

// Determinant of a square row-major matrix by LU with partial pivoting.
double determinant(std::span<const double> matrix, std::size_t n);

}  // namespace bayesreloc
