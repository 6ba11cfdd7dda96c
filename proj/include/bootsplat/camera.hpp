#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

namespace bootsplat {

    /// Quaternion stored COLMAP style as (w, x, y, z).
    using Quat = Eigen::Vector4d;

    Quat normalize_quat(const Quat& q);
    Eigen::Matrix3d quat_to_rotation(const Quat& q);
    Quat rotation_to_quat(const Eigen::Matrix3d& R);

    /// World-to-camera pose. qvec must stay unit norm; every mutator renormalizes.
    struct CameraExtrinsics {
        Quat qvec{1.0, 0.0, 0.0, 0.0};
        Eigen::Vector3d tvec = Eigen::Vector3d::Zero();

        Eigen::Matrix3d rotation() const { return quat_to_rotation(qvec); }
        /// Camera center in world coordinates, -R^T t.
        Eigen::Vector3d center() const;
    };

    /// Pinhole camera used by the rasterizer. Pixel (i, j) has its center at
    /// (i + 0.5, j + 0.5), matching COLMAP's convention.
    struct Camera {
        int width = 0;
        int height = 0;
        double fx = 1.0;
        double fy = 1.0;
        double cx = 0.0;
        double cy = 0.0;
        CameraExtrinsics pose;
        std::string image_name;
        uint32_t image_id = 0;

        Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const;
    };

    /// Camera looking from `eye` at `target` with the camera y-axis pointing
    /// roughly along -up (image rows grow downwards).
    Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                   int width, int height, double focal);

} // namespace bootsplat
