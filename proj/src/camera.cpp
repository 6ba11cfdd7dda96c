#include "bootsplat/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace bootsplat {

    Quat normalize_quat(const Quat& q) {
        const double n = q.norm();
        if (n == 0.0)
            return Quat(1.0, 0.0, 0.0, 0.0);
        return q / n;
    }

    Eigen::Matrix3d quat_to_rotation(const Quat& qraw) {
        const Quat q = normalize_quat(qraw);
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        Eigen::Matrix3d R;
        R << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
            2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
            2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
        return R;
    }

    Quat rotation_to_quat(const Eigen::Matrix3d& R) {
        const Eigen::Quaterniond q(R);
        Quat out(q.w(), q.x(), q.y(), q.z());
        if (out[0] < 0.0)
            out = -out;
        return normalize_quat(out);
    }

    Eigen::Vector3d CameraExtrinsics::center() const { return -(rotation().transpose() * tvec); }

    Eigen::Vector3d Camera::to_camera(const Eigen::Vector3d& world) const { return pose.rotation() * world + pose.tvec; }

    Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                   int width, int height, double focal) {
        const Eigen::Vector3d forward = (target - eye).normalized();
        const Eigen::Vector3d right = forward.cross(up).normalized();
        const Eigen::Vector3d down = forward.cross(right);
        Eigen::Matrix3d R;
        R.row(0) = right.transpose();
        R.row(1) = down.transpose();
        R.row(2) = forward.transpose();

        Camera cam;
        cam.width = width;
        cam.height = height;
        cam.fx = focal;
        cam.fy = focal;
        cam.cx = 0.5 * width;
        cam.cy = 0.5 * height;
        cam.pose.qvec = rotation_to_quat(R);
        cam.pose.tvec = -(cam.pose.rotation() * eye);
        return cam;
    }

} // namespace bootsplat
