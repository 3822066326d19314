#pragma once

#include <Eigen/Dense>

namespace nsmc {

/// Point or vector in R^3.
using Vec3 = Eigen::Vector3d;

/// 3x3 matrix. Gradients follow the row convention: entry (i, k) is the
/// derivative of component i along axis k.
using Mat3 = Eigen::Matrix3d;

inline bool all_finite(const Vec3& v) { return v.allFinite(); }
inline bool all_finite(const Mat3& m) { return m.allFinite(); }

}  // namespace nsmc
