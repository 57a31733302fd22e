#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace occlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A binary occupancy state, one byte per node (0 or 1).
using BitState = std::vector<std::uint8_t>;

inline Vector to_vector(const BitState &x)
{
    Vector v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = x[i];
    return v;
}

} // namespace occlab
