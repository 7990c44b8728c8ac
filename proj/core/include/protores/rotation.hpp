// Copyright 2026 The protores Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace protores {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;  // coeffs() are stored x, y, z, w

/// Threshold below which a vector is treated as zero-length.
inline constexpr double kDegenerateNorm = 1e-8;

/// Builds a rotation from its two-column 6D form by normalize-cross-cross:
/// x = unit(a), z = unit(x × b), y = z × x, R = [x y z].
/// Throws DegenerateRotation when `a` is zero or `a` and `b` are parallel.
Mat3 rotation6d_to_matrix(const Vec6& r6);

/// Same construction with norms regularized by +kDegenerateNorm so that any
/// input, including all zeros, maps to a finite matrix. Used inside the network.
Mat3 rotation6d_to_matrix_regularized(const Vec6& r6);

/// Vector-Jacobian product of rotation6d_to_matrix_regularized at `r6`.
Vec6 rotation6d_to_matrix_vjp(const Vec6& r6, const Mat3& grad_matrix);

/// First two columns of `rotation`, stacked.
Vec6 matrix_to_rotation6d(const Mat3& rotation);

Mat3 rotation_x(double angle);
Mat3 rotation_y(double angle);
Mat3 rotation_z(double angle);

/// Z(angles[0]) · Y(angles[1]) · X(angles[2]), angles in radians.
Mat3 euler_to_matrix(const Vec3& angles);

/// Unit quaternion to rotation matrix; renormalizes the input.
/// Throws DegenerateRotation for a (near) zero quaternion.
Mat3 quaternion_to_matrix(const Quat& q);

/// Rotation matrix to unit quaternion with w >= 0.
Quat matrix_to_quaternion(const Mat3& rotation);

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle);

/// Frobenius norm of RᵀR - I.
double orthonormality_error(const Mat3& rotation);

bool is_rotation(const Mat3& rotation, double tolerance = 1e-6);

}  // namespace protores
