#include "bootsplat/optimizer.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bootsplat;

namespace {

    std::vector<double> flatten(const Gaussian& g) {
        std::vector<double> v;
        for_each_param(g, [&](ParamGroup, const double& x) { v.push_back(x); });
        return v;
    }

} // namespace

TEST(Adam, ZeroGradientLeavesCloudUnchanged) {
    std::mt19937_64 rng(1);
    GaussianCloud cloud = oracle::random_cloud(4, rng);
    const GaussianCloud before = cloud;
    Adam adam(cloud.size());
    for (int it = 1; it <= 5; ++it)
        adam.step(cloud, CloudGradients(cloud.size()), LearningRates{}, it);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        EXPECT_EQ(flatten(cloud.points[i]), flatten(before.points[i]));
}

TEST(Adam, ZeroLearningRateIsIdentity) {
    std::mt19937_64 rng(2);
    GaussianCloud cloud = oracle::random_cloud(3, rng);
    const GaussianCloud before = cloud;
    Adam adam(cloud.size());
    CloudGradients g(cloud.size());
    for (auto& p : g.params)
        for_each_param(p, [](ParamGroup, double& x) { x = 0.3; });
    adam.step(cloud, g, LearningRates::zero(), 1);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        EXPECT_EQ(flatten(cloud.points[i]), flatten(before.points[i]));
}

TEST(Adam, ConstantGradientMatchesScalarReference) {
    GaussianCloud cloud;
    Gaussian g;
    g.color = {0.5, 0.5, 0.5};
    g.opacity_logit = 0.2;
    g.log_scale = {-1, -1, -1};
    cloud.points.push_back(g);
    LearningRates lr;
    Adam adam(1);
    const int k = 25;
    const std::vector<double> grads(k, 0.7);
    CloudGradients cg(1);
    cg.params[0].color = {0.7, 0.7, 0.7};
    cg.params[0].opacity_logit = 0.7;
    cg.params[0].log_scale = {0.7, 0.7, 0.7};
    for (int it = 1; it <= k; ++it)
        adam.step(cloud, cg, lr, it);
    EXPECT_NEAR(cloud.points[0].color[1], oracle::scalar_adam(0.5, grads, lr.color).back(), 1e-14);
    EXPECT_NEAR(cloud.points[0].opacity_logit, oracle::scalar_adam(0.2, grads, lr.opacity).back(), 1e-14);
    EXPECT_NEAR(cloud.points[0].log_scale[2], oracle::scalar_adam(-1.0, grads, lr.scale).back(), 1e-14);
    EXPECT_EQ(adam.steps(), k);
}

TEST(Adam, VaryingGradientMatchesScalarReference) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    GaussianCloud cloud;
    cloud.points.push_back(Gaussian{});
    Adam adam(1);
    LearningRates lr;
    std::vector<double> gs;
    for (int it = 1; it <= 40; ++it) {
        gs.push_back(n(rng));
        CloudGradients cg(1);
        cg.params[0].color[0] = gs.back();
        adam.step(cloud, cg, lr, it);
    }
    EXPECT_NEAR(cloud.points[0].color[0], oracle::scalar_adam(0.0, gs, lr.color).back(), 1e-14);
}

TEST(Adam, PositionRateDecaysLogLinearly) {
    LearningRates lr;
    lr.spatial_scale = 2.0;
    EXPECT_NEAR(lr.position_at(0), 2.0 * 1.6e-4, 1e-18);
    EXPECT_NEAR(lr.position_at(30000), 2.0 * 1.6e-6, 1e-18);
    EXPECT_NEAR(lr.position_at(15000), 2.0 * std::sqrt(1.6e-4 * 1.6e-6), 1e-15);
    EXPECT_NEAR(lr.position_at(60000), 2.0 * 1.6e-6, 1e-18);
}

TEST(Adam, RotationsStayNormalized) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    GaussianCloud cloud = oracle::random_cloud(6, rng);
    Adam adam(cloud.size());
    LearningRates lr;
    lr.rotation = 0.2;
    for (int it = 1; it <= 10; ++it) {
        CloudGradients cg(cloud.size());
        for (auto& p : cg.params)
            p.rotation = Quat(n(rng), n(rng), n(rng), n(rng));
        adam.step(cloud, cg, lr, it);
        for (const auto& g : cloud.points)
            EXPECT_NEAR(g.rotation.norm(), 1.0, 1e-12);
    }
}
