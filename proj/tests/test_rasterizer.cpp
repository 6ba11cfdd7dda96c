#include "bootsplat/rasterizer.hpp"
#include "support/oracles.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

using namespace bootsplat;

namespace {

    Splat2D make_splat(Eigen::Vector2d mean, Eigen::Matrix2d cov, Eigen::Vector3d color, double alpha, double depth,
                       uint32_t index) {
        Splat2D s;
        s.index = index;
        s.mean2d = mean;
        s.cov2d = cov;
        s.conic = cov.inverse();
        s.color = color;
        s.alpha = alpha;
        s.depth = depth;
        s.radius = std::numeric_limits<double>::infinity();
        return s;
    }

    std::vector<Splat2D> random_splats(int n, double px, double py, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<Splat2D> out;
        for (int i = 0; i < n; ++i) {
            Eigen::Matrix2d a;
            a << g(rng), g(rng), g(rng), g(rng);
            const Eigen::Matrix2d cov = a * a.transpose() * 2.0 + 0.3 * Eigen::Matrix2d::Identity();
            out.push_back(make_splat({px + 3.0 * g(rng), py + 3.0 * g(rng)}, cov, {u(rng), u(rng), u(rng)},
                                     0.05 + 0.9 * u(rng), 1.0 + 5.0 * u(rng), static_cast<uint32_t>(i)));
        }
        return out;
    }

    Eigen::Vector3d pixel(const RenderOutput& out, int x, int y) {
        return {out.image.at(x, y, 0), out.image.at(x, y, 1), out.image.at(x, y, 2)};
    }

    Eigen::Vector2d perspective(const Camera& cam, const Eigen::Vector3d& p) {
        return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
    }

    Camera axis_camera(int w, int h, double f) {
        Camera cam;
        cam.width = w;
        cam.height = h;
        cam.fx = cam.fy = f;
        cam.cx = 0.5 * w;
        cam.cy = 0.5 * h;
        return cam;
    }

} // namespace

TEST(Blend, SingleOpaqueSplatAtItsCenter) {
    const std::vector<Splat2D> s{make_splat({0.5, 0.5}, Eigen::Matrix2d::Identity(), {0.2, 0.4, 0.9}, 1.0, 1.0, 0)};
    const RenderOutput out = rasterize(s, 1, 1);
    EXPECT_LT((pixel(out, 0, 0) - Eigen::Vector3d(0.2, 0.4, 0.9)).norm(), 1e-15);
    EXPECT_DOUBLE_EQ(out.alpha[0], 1.0);
}

TEST(Blend, TwoCoincidentHalfSplats) {
    const Eigen::Vector3d c1(1, 0, 0), c2(0, 1, 0);
    const std::vector<Splat2D> s{make_splat({0.5, 0.5}, Eigen::Matrix2d::Identity(), c2, 0.5, 2.0, 1),
                                 make_splat({0.5, 0.5}, Eigen::Matrix2d::Identity(), c1, 0.5, 1.0, 0)};
    const RenderOutput out = rasterize(s, 1, 1);
    EXPECT_LT((pixel(out, 0, 0) - (0.5 * c1 + 0.25 * c2)).norm(), 1e-15);
}

TEST(Blend, TwentyRandomSplatsMatchDirectEvaluation) {
    std::mt19937_64 rng(1);
    RasterConfig cfg;
    cfg.early_stop = false;
    for (int trial = 0; trial < 100; ++trial) {
        const auto splats = random_splats(20, 0.5, 0.5, rng);
        const RenderOutput out = rasterize(splats, 1, 1, cfg);
        const Eigen::Vector3d want = oracle::blend_direct(splats, 0.5, 0.5, cfg.background, cfg.min_contribution);
        EXPECT_LT((pixel(out, 0, 0) - want).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Blend, EarlyStopStaysWithinTolerance) {
    std::mt19937_64 rng(2);
    RasterConfig off;
    off.early_stop = false;
    for (int trial = 0; trial < 50; ++trial) {
        auto splats = random_splats(60, 8.0, 8.0, rng);
        for (auto& s : splats)
            s.alpha = 0.9;
        const RenderOutput a = rasterize(splats, 16, 16);
        const RenderOutput b = rasterize(splats, 16, 16, off);
        EXPECT_LT(max_abs_diff(a.image, b.image), 1e-3);
    }
}

TEST(Blend, InputPermutationIsBitwiseInvariant) {
    std::mt19937_64 rng(3);
    auto splats = random_splats(80, 16, 16, rng);
    splats[5].depth = splats[9].depth; // exercise the index tie-break
    const RenderOutput ref = rasterize(splats, 32, 32);
    for (int k = 0; k < 5; ++k) {
        std::shuffle(splats.begin(), splats.end(), rng);
        const RenderOutput out = rasterize(splats, 32, 32);
        EXPECT_EQ(out.image.data, ref.image.data);
    }
}

TEST(Blend, WhiteSplatsNeverExceedOne) {
    std::mt19937_64 rng(4);
    auto splats = random_splats(200, 16, 16, rng);
    for (auto& s : splats)
        s.color = Eigen::Vector3d::Ones();
    const RenderOutput out = rasterize(splats, 32, 32);
    for (double v : out.image.data)
        EXPECT_LE(v, 1.0 + 1e-6);
}

TEST(Blend, TileSizeAndSerialReferenceAgreeBitwise) {
    std::mt19937_64 rng(5);
    GaussianCloud cloud = oracle::random_cloud(60, rng);
    const Camera cam = oracle::camera_for_scene(50, 40, rng);
    const auto splats = project(cloud, cam);
    RasterConfig whole;
    whole.tile_size = 64;
    const RenderOutput a = rasterize(splats, 50, 40);
    const RenderOutput b = rasterize(splats, 50, 40, whole);
    const RenderOutput c = reference::rasterize(splats, 50, 40);
    EXPECT_EQ(a.image.data, b.image.data);
    EXPECT_EQ(a.image.data, c.image.data);
    EXPECT_EQ(a.alpha, c.alpha);
    EXPECT_EQ(a.depth, c.depth);
}

TEST(Project, OnAxisIsotropicGaussian) {
    const Camera cam = axis_camera(64, 48, 80.0);
    GaussianCloud cloud;
    Gaussian g;
    const double d = 4.0, s = 0.2;
    g.position = {0, 0, d};
    g.log_scale = Eigen::Vector3d::Constant(std::log(s));
    g.opacity_logit = logit(0.8);
    cloud.points.push_back(g);
    RasterConfig cfg;
    const auto splats = project(cloud, cam, cfg);
    ASSERT_EQ(splats.size(), 1u);
    EXPECT_LT((splats[0].mean2d - Eigen::Vector2d(cam.cx, cam.cy)).norm(), 1e-12);
    const double v = std::pow(80.0 * s / d, 2);
    const Eigen::Matrix2d want = v * Eigen::Matrix2d::Identity() + cfg.dilation * Eigen::Matrix2d::Identity();
    EXPECT_LT((splats[0].cov2d - want).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_DOUBLE_EQ(splats[0].depth, d);
}

TEST(Project, CovarianceMatchesFiniteDifferenceJacobian) {
    std::mt19937_64 rng(6);
    RasterConfig cfg;
    cfg.dilation = 0.0;
    cfg.min_contribution = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        GaussianCloud cloud = oracle::random_cloud(1, rng);
        const Camera cam = oracle::camera_for_scene(64, 64, rng);
        const auto splats = project(cloud, cam, cfg);
        ASSERT_EQ(splats.size(), 1u);
        const Eigen::Vector3d p = cam.to_camera(cloud.points[0].position);
        Eigen::Matrix<double, 2, 3> J;
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[k] = h;
            J.col(k) = (perspective(cam, p + e) - perspective(cam, p - e)) / (2 * h);
        }
        const Eigen::Matrix3d W = cam.pose.rotation();
        const Eigen::Matrix3d S = build_covariance(cloud.points[0].rotation, cloud.points[0].log_scale);
        const Eigen::Matrix2d want = J * W * S * W.transpose() * J.transpose();
        EXPECT_LT((splats[0].cov2d - want).cwiseAbs().maxCoeff(), 1e-6 * want.cwiseAbs().maxCoeff());
        EXPECT_LT((splats[0].mean2d - perspective(cam, p)).norm(), 1e-12);
    }
}

TEST(Project, BehindCameraIsCulled) {
    const Camera cam = axis_camera(32, 32, 40);
    GaussianCloud cloud;
    Gaussian g;
    g.position = {0, 0, -2};
    g.opacity_logit = logit(0.9);
    cloud.points.push_back(g);
    EXPECT_TRUE(project(cloud, cam).empty());
}

TEST(Project, JointTranslationInvariance) {
    std::mt19937_64 rng(7);
    GaussianCloud cloud = oracle::random_cloud(20, rng);
    Camera cam = oracle::camera_for_scene(40, 40, rng);
    const auto a = project(cloud, cam);
    const Eigen::Vector3d shift(0.7, -1.3, 2.1);
    for (auto& g : cloud.points)
        g.position += shift;
    // Moving the center by `shift` changes t by -R shift.
    cam.pose.tvec -= cam.pose.rotation() * shift;
    const auto b = project(cloud, cam);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LT((a[i].mean2d - b[i].mean2d).norm(), 1e-9);
        EXPECT_LT((a[i].cov2d - b[i].cov2d).norm(), 1e-9);
        EXPECT_NEAR(a[i].depth, b[i].depth, 1e-9);
        EXPECT_LT((a[i].color - b[i].color).norm(), 1e-9);
    }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(8);
    const GaussianCloud cloud = oracle::random_cloud(10, rng);
    const Camera cam = oracle::camera_for_scene(32, 32, rng);
    const Render r = render(cloud, cam);
    CloudGradients grads(cloud.size());
    render_backward(cloud, cam, r, ImageBuffer(32, 32, 0.0), RasterConfig{}, grads);
    EXPECT_TRUE(grads.all_zero());
}

TEST(Backward, TiledMatchesSerialReference) {
    std::mt19937_64 rng(9);
    const GaussianCloud cloud = oracle::random_cloud(40, rng);
    const Camera cam = oracle::camera_for_scene(48, 40, rng);
    const Render r = render(cloud, cam);
    const ImageBuffer w = oracle::random_image(48, 40, rng);
    const auto a = rasterize_backward(r.splats, r.output, w);
    const auto b = reference::rasterize_backward(r.splats, 48, 40, w);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = 1.0 + b[i].mean2d.norm() + b[i].cov2d.norm() + b[i].color.norm() + std::abs(b[i].alpha);
        EXPECT_LT((a[i].mean2d - b[i].mean2d).norm() / scale, 1e-12);
        EXPECT_LT((a[i].cov2d - b[i].cov2d).norm() / scale, 1e-12);
        EXPECT_LT((a[i].color - b[i].color).norm() / scale, 1e-12);
        EXPECT_LT(std::abs(a[i].alpha - b[i].alpha) / scale, 1e-12);
    }
}

TEST(Backward, MatchesFiniteDifferencesOnFiveGaussians) {
    std::mt19937_64 rng(10);
    for (int scene = 0; scene < 4; ++scene) {
        const GaussianCloud cloud = oracle::random_cloud(5, rng);
        const Camera cam = oracle::camera_for_scene(32, 32, rng);
        ImageBuffer w = oracle::random_image(32, 32, rng);
        for (auto& v : w.data)
            v = 2.0 * v - 1.0;
        const auto res = oracle::finite_difference_check(cloud, cam, w);
        EXPECT_EQ(res.passed, res.checked) << "worst relative error " << res.worst;
    }
}

TEST(Backward, OccludedColorHasNearZeroGradient) {
    const Camera cam = axis_camera(16, 16, 20);
    GaussianCloud cloud;
    Gaussian front;
    front.position = {0, 0, 2};
    front.log_scale = Eigen::Vector3d::Constant(std::log(1.0));
    front.opacity_logit = logit(0.999);
    front.color = {0.5, 0.5, 0.5};
    Gaussian back = front;
    back.position = {0, 0, 3};
    back.log_scale = Eigen::Vector3d::Constant(std::log(0.2));
    back.opacity_logit = logit(0.8);
    cloud.points = {front, back};
    const ImageBuffer w(16, 16, 1.0);
    RasterConfig cfg;
    cfg.min_contribution = 0.0;
    cfg.early_stop = false;
    const Render r = render(cloud, cam, cfg);
    CloudGradients grads(2);
    render_backward(cloud, cam, r, w, cfg, grads);
    const double gf = grads.params[0].color.norm();
    const double gb = grads.params[1].color.norm();
    EXPECT_LT(gb, 1e-2 * gf);

    // Central difference on the occluded red channel agrees.
    auto loss = [&](const GaussianCloud& c) {
        const Render rr = render(c, cam, cfg);
        double s = 0;
        for (double v : rr.output.image.data)
            s += v;
        return s;
    };
    GaussianCloud p = cloud, m = cloud;
    p.points[1].color[0] += 1e-4;
    m.points[1].color[0] -= 1e-4;
    const double fd = (loss(p) - loss(m)) / 2e-4;
    EXPECT_NEAR(grads.params[1].color[0], fd, 1e-8 + 1e-4 * std::abs(fd));
    EXPECT_LT(std::abs(fd), 1e-2 * gf);
}

TEST(Backward, ScreenGradientsAreNdcScaled) {
    std::mt19937_64 rng(11);
    const GaussianCloud cloud = oracle::random_cloud(8, rng);
    const Camera cam = oracle::camera_for_scene(40, 30, rng);
    const Render r = render(cloud, cam);
    const ImageBuffer w = oracle::random_image(40, 30, rng);
    const auto sg = rasterize_backward(r.splats, r.output, w);
    CloudGradients grads(cloud.size());
    ScreenGradients screen;
    project_backward(cloud, cam, r.splats, sg, grads, &screen);
    ASSERT_EQ(screen.grad.size(), cloud.size());
    for (std::size_t k = 0; k < r.splats.size(); ++k) {
        const uint32_t i = r.splats[k].index;
        EXPECT_TRUE(screen.visible[i]);
        EXPECT_NEAR(screen.grad[i].x(), sg[k].mean2d.x() * 20.0, 1e-12);
        EXPECT_NEAR(screen.grad[i].y(), sg[k].mean2d.y() * 15.0, 1e-12);
    }
}
