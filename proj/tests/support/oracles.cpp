#include "oracles.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace jslam::oracle {

Pose horn_absolute_orientation(std::span<const Vec3> meas, std::span<const Vec3> lm) {
  const double n = static_cast<double>(meas.size());
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (size_t i = 0; i < meas.size(); ++i) {
    ca += meas[i];
    cb += lm[i];
  }
  ca /= n;
  cb /= n;
  Mat3 S = Mat3::Zero();
  for (size_t i = 0; i < meas.size(); ++i) S += (meas[i] - ca) * (lm[i] - cb).transpose();
  const double Sxx = S(0, 0), Sxy = S(0, 1), Sxz = S(0, 2);
  const double Syx = S(1, 0), Syy = S(1, 1), Syz = S(1, 2);
  const double Szx = S(2, 0), Szy = S(2, 1), Szz = S(2, 2);
  Eigen::Matrix4d N;
  N << Sxx + Syy + Szz, Syz - Szy, Szx - Sxz, Sxy - Syx,
       Syz - Szy, Sxx - Syy - Szz, Sxy + Syx, Szx + Sxz,
       Szx - Sxz, Sxy + Syx, -Sxx + Syy - Szz, Syz + Szy,
       Sxy - Syx, Szx + Sxz, Syz + Szy, -Sxx - Syy + Szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(N);
  const Eigen::Vector4d v = eig.eigenvectors().col(3);
  const Eigen::Quaterniond q(v(0), v(1), v(2), v(3));
  const Mat3 R = q.normalized().toRotationMatrix();
  return Pose(R, cb - R * ca);
}

Vec3 homogeneous_transform(const Mat4& T, const Vec3& p) {
  const Eigen::Vector4d h = T * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  return h.head<3>() / h(3);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

Vec3 random_point(std::mt19937_64& rng, double half_extent) {
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  return {u(rng), u(rng), u(rng)};
}

Pose random_pose(std::mt19937_64& rng, double max_angle_rad, double max_translation) {
  std::uniform_real_distribution<double> a(0.0, max_angle_rad);
  const Vec3 axis = random_unit(rng);
  const Eigen::AngleAxisd aa(a(rng), axis);
  return Pose(Eigen::Quaterniond(aa), random_point(rng, max_translation));
}

}  // namespace jslam::oracle
