#pragma once

#include "bootsplat/camera.hpp"
#include "bootsplat/colmap_io.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bootsplat {

    /// Degree-1 SH basis constant; view-dependent color is
    /// c + kSH1 * (-y*sh[0] + z*sh[1] - x*sh[2]) for unit view direction (x,y,z).
    inline constexpr double kSH1 = 0.4886025119029199;

    /// One trainable Gaussian. The same layout doubles as a gradient or
    /// optimizer-moment record, which keeps structural edits (clone, split,
    /// prune) uniform across all per-point arrays.
    struct Gaussian {
        Eigen::Vector3d position = Eigen::Vector3d::Zero();
        Quat rotation{1.0, 0.0, 0.0, 0.0};
        Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
        double opacity_logit = 0.0;
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        std::array<Eigen::Vector3d, 3> sh1{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};

        static Gaussian zero();

        double opacity() const;
        Eigen::Vector3d scale() const { return log_scale.array().exp(); }
    };

    enum class ParamGroup { Position, Rotation, Scale, Opacity, Color, SH };
    inline constexpr std::size_t kParamsPerGaussian = 23;

    /// Visits every scalar of `g` in a fixed order together with its group.
    template <typename G, typename F>
    void for_each_param(G& g, F&& f) {
        for (int i = 0; i < 3; ++i)
            f(ParamGroup::Position, g.position[i]);
        for (int i = 0; i < 4; ++i)
            f(ParamGroup::Rotation, g.rotation[i]);
        for (int i = 0; i < 3; ++i)
            f(ParamGroup::Scale, g.log_scale[i]);
        f(ParamGroup::Opacity, g.opacity_logit);
        for (int i = 0; i < 3; ++i)
            f(ParamGroup::Color, g.color[i]);
        for (auto& v : g.sh1)
            for (int i = 0; i < 3; ++i)
                f(ParamGroup::SH, v[i]);
    }

    struct GaussianCloud {
        std::vector<Gaussian> points;
        int sh_degree = 0; // active degree, 0 or 1

        std::size_t size() const { return points.size(); }
        bool empty() const { return points.empty(); }
    };

    inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
    inline double logit(double p) { return std::log(p / (1.0 - p)); }

    /// Sigma = R diag(exp(2 log_scale)) R^T.
    Eigen::Matrix3d build_covariance(const Quat& rotation, const Eigen::Vector3d& log_scale);

    /// exp(-0.5 (x-mu)^T (Sigma + 1e-8 I)^-1 (x-mu))
    double evaluate_gaussian(const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov, const Eigen::Vector3d& x);

    inline constexpr double kCovarianceRegularizer = 1e-8;
    inline constexpr double kInitialOpacity = 0.1;

    /// Mean distance to the 3 nearest neighbours, per point (k-d tree).
    std::vector<double> mean_knn_distance(std::span<const Eigen::Vector3d> points, int k = 3);

    /// Throws EmptySceneError for an empty list.
    GaussianCloud init_from_sfm(std::span<const colmap::SparsePoint> points);

    /// Renormalize rotations; call after any optimizer step.
    void normalize_rotations(GaussianCloud& cloud);

    // Checkpoint: "BSPL" magic, u32 version, u32 sh_degree, u64 iteration,
    // u64 point count, then 23 little-endian doubles per point in
    // for_each_param order.
    void save_checkpoint(const GaussianCloud& cloud, uint64_t iteration, const std::filesystem::path& path);
    GaussianCloud load_checkpoint(const std::filesystem::path& path, uint64_t* iteration = nullptr);
    std::vector<uint8_t> serialize_cloud(const GaussianCloud& cloud, uint64_t iteration);
    GaussianCloud deserialize_cloud(std::span<const uint8_t> bytes, uint64_t* iteration = nullptr);

} // namespace bootsplat
