#include "bootsplat/camera.hpp"
#include "bootsplat/errors.hpp"
#include "bootsplat/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

using namespace bootsplat;

namespace {

    Quat random_quat(std::mt19937_64& rng) {
        std::normal_distribution<double> n;
        return Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
    }

    Eigen::Matrix3d random_spd(std::mt19937_64& rng) {
        std::normal_distribution<double> n;
        Eigen::Matrix3d a;
        for (int i = 0; i < 9; ++i)
            a(i / 3, i % 3) = n(rng);
        return a * a.transpose() + 0.2 * Eigen::Matrix3d::Identity();
    }

} // namespace

TEST(Covariance, IdentityCases) {
    const Quat id(1, 0, 0, 0);
    EXPECT_LT((build_covariance(id, Eigen::Vector3d::Zero()) - Eigen::Matrix3d::Identity()).norm(), 1e-15);
    const Eigen::Matrix3d d = build_covariance(id, Eigen::Vector3d(std::log(2.0), 0, 0));
    EXPECT_LT((d - Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix()).norm(), 1e-12);
}

TEST(Covariance, EigenvaluesAreSquaredScales) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Vector3d ls(u(rng), u(rng), u(rng));
        const Eigen::Matrix3d s = build_covariance(random_quat(rng), ls);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
        std::vector<double> got(es.eigenvalues().data(), es.eigenvalues().data() + 3);
        std::vector<double> want{std::exp(2 * ls[0]), std::exp(2 * ls[1]), std::exp(2 * ls[2])};
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (int k = 0; k < 3; ++k)
            EXPECT_NEAR(got[static_cast<std::size_t>(k)], want[static_cast<std::size_t>(k)], 1e-10 * want[2]);
    }
}

TEST(Covariance, SymmetricPsdOverManyDraws) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-4.0, 2.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const Eigen::Matrix3d s = build_covariance(random_quat(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)));
        ASSERT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
        ASSERT_GE(es.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(EvaluateGaussian, AnalyticValues) {
    const Eigen::Vector3d mu(0.3, -0.2, 1.0);
    EXPECT_DOUBLE_EQ(evaluate_gaussian(mu, Eigen::Matrix3d::Identity(), mu), 1.0);
    const Eigen::Vector3d x = mu + Eigen::Vector3d(1.0, 1.0, 0.0);
    EXPECT_NEAR(evaluate_gaussian(mu, Eigen::Matrix3d::Identity(), x), std::exp(-1.0), 1e-7);
}

TEST(EvaluateGaussian, MatchesDenseSolve) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Matrix3d s = random_spd(rng);
        const Eigen::Vector3d mu(n(rng), n(rng), n(rng));
        const Eigen::Vector3d x(n(rng), n(rng), n(rng));
        const Eigen::Matrix3d reg = s + kCovarianceRegularizer * Eigen::Matrix3d::Identity();
        const Eigen::Vector3d sol = reg.fullPivLu().solve(x - mu);
        const double want = std::exp(-0.5 * (x - mu).dot(sol));
        EXPECT_NEAR(evaluate_gaussian(mu, s, x), want, 1e-10);
    }
}

TEST(EvaluateGaussian, PeakAtMeanOnGrid) {
    std::mt19937_64 rng(4);
    const Eigen::Matrix3d s = random_spd(rng);
    const Eigen::Vector3d mu(0.1, 0.2, 0.3);
    const double peak = evaluate_gaussian(mu, s, mu);
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j)
            for (int k = -3; k <= 3; ++k) {
                if (i == 0 && j == 0 && k == 0)
                    continue;
                const double v = evaluate_gaussian(mu, s, mu + 0.1 * Eigen::Vector3d(i, j, k));
                EXPECT_LT(v, peak);
                EXPECT_GT(v, 0.0);
            }
}

TEST(InitFromSfm, SinglePoint) {
    colmap::SparsePoint p;
    p.color = {255, 0, 51};
    const GaussianCloud c = init_from_sfm(std::vector<colmap::SparsePoint>{p});
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c.points[0].position, Eigen::Vector3d::Zero());
    EXPECT_NEAR(c.points[0].opacity(), kInitialOpacity, 1e-12);
    EXPECT_NEAR(c.points[0].color[0], 1.0, 1e-12);
    EXPECT_NEAR(c.points[0].color[2], 0.2, 1e-12);
    EXPECT_TRUE(c.points[0].log_scale.allFinite());
}

TEST(InitFromSfm, TetrahedronScaleIsEdgeLength) {
    const double e = 1.7;
    const std::vector<Eigen::Vector3d> verts{
        {1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    std::vector<colmap::SparsePoint> pts;
    for (const auto& v : verts) {
        colmap::SparsePoint p;
        p.position = v * e / std::sqrt(8.0); // edge length = e
        pts.push_back(p);
    }
    const GaussianCloud c = init_from_sfm(pts);
    ASSERT_EQ(c.size(), 4u);
    for (const auto& g : c.points)
        for (int k = 0; k < 3; ++k)
            EXPECT_NEAR(g.log_scale[k], std::log(e), 1e-12);
}

TEST(InitFromSfm, KnnMatchesBruteForce) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 300; ++i)
        pts.emplace_back(n(rng), n(rng), n(rng));
    const auto fast = mean_knn_distance(pts, 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i)
                d.push_back((pts[i] - pts[j]).norm());
        std::sort(d.begin(), d.end());
        EXPECT_NEAR(fast[i], (d[0] + d[1] + d[2]) / 3.0, 1e-12);
    }
}

TEST(InitFromSfm, EmptyIsAnError) {
    EXPECT_THROW(init_from_sfm(std::vector<colmap::SparsePoint>{}), EmptySceneError);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n;
    GaussianCloud c;
    c.sh_degree = 1;
    for (int i = 0; i < 5; ++i) {
        Gaussian g;
        for_each_param(g, [&](ParamGroup, double& v) { v = n(rng); });
        c.points.push_back(g);
    }
    uint64_t it = 0;
    const GaussianCloud back = deserialize_cloud(serialize_cloud(c, 1234), &it);
    EXPECT_EQ(it, 1234u);
    EXPECT_EQ(back.sh_degree, 1);
    ASSERT_EQ(back.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<double> a, b;
        for_each_param(c.points[i], [&](ParamGroup, const double& v) { a.push_back(v); });
        for_each_param(back.points[i], [&](ParamGroup, const double& v) { b.push_back(v); });
        EXPECT_EQ(a, b);
    }
    auto bytes = serialize_cloud(c, 1);
    bytes[0] = 'X';
    EXPECT_THROW(deserialize_cloud(bytes), CheckpointError);
    bytes = serialize_cloud(c, 1);
    bytes.pop_back();
    EXPECT_THROW(deserialize_cloud(bytes), CheckpointError);
}

TEST(CameraMath, QuaternionRotationRoundTrip) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        Quat q = random_quat(rng);
        if (q[0] < 0)
            q = -q;
        const Eigen::Matrix3d R = quat_to_rotation(q);
        EXPECT_LT((R * R.transpose() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
        Quat back = rotation_to_quat(R);
        if (back[0] < 0)
            back = -back;
        EXPECT_LT((back - q).norm(), 1e-10);
    }
}

TEST(CameraMath, LookAtPutsTargetOnAxis) {
    const Camera cam = look_at({3, 1, 0.5}, {0, 0, 0}, {0, 0, 1}, 40, 30, 50);
    const Eigen::Vector3d p = cam.to_camera(Eigen::Vector3d::Zero());
    EXPECT_NEAR(p.x(), 0.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.z(), std::sqrt(9 + 1 + 0.25), 1e-12);
    EXPECT_LT((cam.pose.center() - Eigen::Vector3d(3, 1, 0.5)).norm(), 1e-12);
    // A point above the target projects into the upper half of the image.
    EXPECT_LT(cam.to_camera({0, 0, 1}).y(), 0.0);
}
