#pragma once

#include <Eigen/Dense>
#include <span>

namespace tmm {

// N x D point set, one point per row. Row-major so that each point is a
// contiguous span of D doubles.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Point = std::span<const double>;

inline Point row(const Points& p, Eigen::Index i) {
    return {p.data() + i * p.cols(), static_cast<std::size_t>(p.cols())};
}

inline std::span<double> row(Points& p, Eigen::Index i) {
    return {p.data() + i * p.cols(), static_cast<std::size_t>(p.cols())};
}

inline Point as_point(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Eigen::VectorXd to_vector(Point x) {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// Smallest infinity-norm distance between two distinct rows; +inf when N < 2.
double min_pairwise_distance(const Points& p);

}  // namespace tmm
