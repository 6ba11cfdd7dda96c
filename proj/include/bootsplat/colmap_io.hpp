#pragma once

#include "bootsplat/camera.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bootsplat::colmap {

    enum class Format { Binary, Text };

    enum class CameraModel : int32_t { SimplePinhole = 0, Pinhole = 1 };

    const char* model_name(CameraModel model);
    std::size_t model_param_count(CameraModel model);

    struct CameraIntrinsics {
        uint32_t camera_id = 0;
        CameraModel model = CameraModel::Pinhole;
        uint64_t width = 0;
        uint64_t height = 0;
        std::vector<double> params; // f, cx, cy  or  fx, fy, cx, cy

        double fx() const { return params.at(0); }
        double fy() const { return model == CameraModel::SimplePinhole ? params.at(0) : params.at(1); }
        double cx() const { return model == CameraModel::SimplePinhole ? params.at(1) : params.at(2); }
        double cy() const { return model == CameraModel::SimplePinhole ? params.at(2) : params.at(3); }
    };

    struct ImageRecord {
        uint32_t image_id = 0;
        std::string name;
        CameraExtrinsics pose;
        uint32_t camera_id = 0;
    };

    struct SparsePoint {
        uint64_t point_id = 0;
        Eigen::Vector3d position = Eigen::Vector3d::Zero();
        std::array<uint8_t, 3> color{0, 0, 0};
        double error = 0.0;
    };

    // Parsers throw ColmapError. Image qvecs are normalized on load.
    std::vector<CameraIntrinsics> parse_cameras(std::span<const uint8_t> bytes, Format format);
    std::vector<ImageRecord> parse_images(std::span<const uint8_t> bytes, Format format);
    std::vector<SparsePoint> parse_points3d(std::span<const uint8_t> bytes, Format format);

    std::vector<uint8_t> write_cameras(std::span<const CameraIntrinsics> cameras, Format format);
    std::vector<uint8_t> write_images(std::span<const ImageRecord> images, Format format);
    std::vector<uint8_t> write_points3d(std::span<const SparsePoint> points, Format format);

    struct SparseModel {
        std::vector<CameraIntrinsics> cameras;
        std::vector<ImageRecord> images;
        std::vector<SparsePoint> points;
    };

    /// Reads `dir/{cameras,images,points3D}.bin`, falling back to `.txt`.
    SparseModel read_model(const std::filesystem::path& dir);
    void write_model(const SparseModel& model, const std::filesystem::path& dir, Format format);

    std::vector<uint8_t> read_file(const std::filesystem::path& path);
    void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

} // namespace bootsplat::colmap
