#pragma once

#include <Eigen/Dense>

namespace gpbd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat3x2 = Eigen::Matrix<double, 3, 2>;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using MatX = Eigen::MatrixXd;

} // namespace gpbd
