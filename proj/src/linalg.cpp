#include "bayesreloc/linalg.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "bayesreloc/error.hpp"

namespace bayesreloc {

double determinant(std::span<const double> matrix, std::size_t n) {
    if (matrix.size() != n * n) throw Error(ErrorKind::ShapeMismatch, "determinant of a non-square matrix");
    std::vector<double> a(matrix.begin(), matrix.end());
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        for (std::size_t r = k + 1; r < n; ++r) {
            if (std::abs(a[r * n + k]) > std::abs(a[pivot * n + k])) pivot = r;
        }
        if (a[pivot * n + k] == 0.0) return 0.0;
        if (pivot != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[k * n + c], a[pivot * n + c]);
            det = -det;
        }
        const double d = a[k * n + k];
        det *= d;
        for (std::size_t r = k + 1; r < n; ++r) {
            const double f = a[r * n + k] / d;
            for (std::size_t c = k; c < n; ++c) a[r * n + c] -= f * a[k * n + c];
        }
    }
    return det;
}

}  // namespace bayesreloc
