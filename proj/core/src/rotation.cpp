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

#include "protores/rotation.hpp"

#include <cmath>

#include "protores/error.hpp"

namespace protores {

namespace {

// d(u / (|u| + eps)) / du, symmetric.
Mat3 regularized_normalize_jacobian(const Vec3& u) {
  const double n = u.norm();
  const double d = n + kDegenerateNorm;
  Mat3 jac = Mat3::Identity() / d;
  if (n > 0.0) {
    jac -= (u * u.transpose()) / (n * d * d);
  }
  return jac;
}

}  // namespace

Mat3 rotation6d_to_matrix(const Vec6& r6) {
  const Vec3 a = r6.head<3>();
  const Vec3 b = r6.tail<3>();
  const double a_norm = a.norm();
  if (!(a_norm > kDegenerateNorm)) {
    throw DegenerateRotation("rotation6d: first column has zero length", a_norm);
  }
  const Vec3 x = a / a_norm;
  const Vec3 w = x.cross(b);
  const double w_norm = w.norm();
  if (!(w_norm > kDegenerateNorm)) {
    throw DegenerateRotation("rotation6d: columns are parallel", w_norm);
  }
  const Vec3 z = w / w_norm;
  const Vec3 y = z.cross(x);
  Mat3 r;
  r << x, y, z;
  return r;
}

Mat3 rotation6d_to_matrix_regularized(const Vec6& r6) {
  const Vec3 a = r6.head<3>();
  const Vec3 b = r6.tail<3>();
  const Vec3 x = a / (a.norm() + kDegenerateNorm);
  const Vec3 w = x.cross(b);
  const Vec3 z = w / (w.norm() + kDegenerateNorm);
  const Vec3 y = z.cross(x);
  Mat3 r;
  r << x, y, z;
  return r;
}

Vec6 rotation6d_to_matrix_vjp(const Vec6& r6, const Mat3& grad_matrix) {
  const Vec3 a = r6.head<3>();
  const Vec3 b = r6.tail<3>();
  const Vec3 x = a / (a.norm() + kDegenerateNorm);
  const Vec3 w = x.cross(b);
  const Vec3 z = w / (w.norm() + kDegenerateNorm);

  const Vec3 gy = grad_matrix.col(1);
  // y = z × x
  Vec3 gx = grad_matrix.col(0) + gy.cross(z);
  const Vec3 gz = grad_matrix.col(2) + x.cross(gy);
  // z = unit(w), w = x × b
  const Vec3 gw = regularized_normalize_jacobian(w) * gz;
  gx += b.cross(gw);
  const Vec3 gb = gw.cross(x);
  const Vec3 ga = regularized_normalize_jacobian(a) * gx;

  Vec6 out;
  out << ga, gb;
  return out;
}

Vec6 matrix_to_rotation6d(const Mat3& rotation) {
  Vec6 out;
  out << rotation.col(0), rotation.col(1);
  return out;
}

Mat3 rotation_x(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

Mat3 rotation_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Mat3 rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

Mat3 euler_to_matrix(const Vec3& angles) {
  return rotation_z(angles[0]) * rotation_y(angles[1]) * rotation_x(angles[2]);
}

Mat3 quaternion_to_matrix(const Quat& q) {
  const double n = q.coeffs().norm();
  if (!(n > kDegenerateNorm)) {
    throw DegenerateRotation("quaternion has zero length", n);
  }
  const double x = q.x() / n, y = q.y() / n, z = q.z() / n, w = q.w() / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
       2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
       2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

Quat matrix_to_quaternion(const Mat3& rotation) {
  Quat q(rotation);
  q.normalize();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double orthonormality_error(const Mat3& rotation) {
  return (rotation.transpose() * rotation - Mat3::Identity()).norm();
}

bool is_rotation(const Mat3& rotation, double tolerance) {
  return rotation.allFinite() && orthonormality_error(rotation) < tolerance &&
         std::abs(rotation.determinant() - 1.0) < tolerance;
}

}  // namespace protores
