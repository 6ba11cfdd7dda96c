#include "bootsplat/densify.hpp"
#include "bootsplat/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace bootsplat {

    void GradAccumulator::accumulate(const Eigen::Vector2d& screen_grad) {
        vector_sum += screen_grad;
        magnitude_sum += screen_grad.norm();
        ++count;
    }

    double GradAccumulator::consistency() const {
        if (magnitude_sum <= 0.0)
            return 0.0;
        return std::min(1.0, vector_sum.norm() / magnitude_sum);
    }

    double GradAccumulator::mean_magnitude() const { return count == 0 ? 0.0 : magnitude_sum / count; }

    void DensifyConfig::validate() const {
        if (!(clone_grad_threshold > 0.0) || !(split_scale_threshold > 0.0) || densify_interval <= 0 ||
            opacity_reset_interval <= 0 || !(prune_alpha > 0.0) || !(split_scale_divisor > 0.0))
            throw ConfigError("densify thresholds must be positive");
        if (!(direction_consistency_ratio > 0.0) || direction_consistency_ratio > 1.0)
            throw ConfigError("direction_consistency_ratio must be in (0, 1]");
    }

    std::vector<DensifyAction> densify_decision(std::span<const GradAccumulator> acc, const GaussianCloud& cloud,
                                                const DensifyConfig& cfg) {
        std::vector<DensifyAction> actions(cloud.size(), DensifyAction::None);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Gaussian& g = cloud.points[i];
            if (g.opacity() < cfg.prune_alpha) {
                actions[i] = DensifyAction::Prune;
                continue;
            }
            if (i >= acc.size())
                continue;
            const GradAccumulator& a = acc[i];
            if (!(a.mean_magnitude() > cfg.clone_grad_threshold))
                continue;
            const double max_scale = g.scale().maxCoeff();
            if (max_scale >= cfg.split_scale_threshold)
                actions[i] = DensifyAction::Split;
            else if (a.consistency() >= cfg.direction_consistency_ratio)
                actions[i] = DensifyAction::Clone;
        }
        return actions;
    }

    namespace {

        // A sample from N(mu, Sigma) restricted to the 3-sigma ellipsoid.
        Eigen::Vector3d sample_inside(const Gaussian& g, std::mt19937_64& rng) {
            std::normal_distribution<double> normal(0.0, 1.0);
            const Eigen::Matrix3d R = quat_to_rotation(g.rotation);
            const Eigen::Vector3d s = g.scale();
            for (;;) {
                const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
                if (z.squaredNorm() <= 9.0)
                    return g.position + R * s.cwiseProduct(z);
            }
        }

    } // namespace

    DensifyStats apply_actions(GaussianCloud& cloud, std::vector<GradAccumulator>& acc, Adam* adam,
                               std::span<const DensifyAction> actions, const DensifyConfig& cfg, std::mt19937_64& rng) {
        DensifyStats stats;
        const std::size_t n = cloud.size();
        acc.resize(n);
        std::vector<Gaussian> m_empty, v_empty;
        std::vector<Gaussian>& m = adam ? adam->first_moments() : m_empty;
        std::vector<Gaussian>& v = adam ? adam->second_moments() : v_empty;
        if (adam) {
            m.resize(n, Gaussian::zero());
            v.resize(n, Gaussian::zero());
        }

        std::vector<Gaussian> points, new_m, new_v;
        std::vector<GradAccumulator> new_acc;
        std::vector<Gaussian> appended;
        points.reserve(n);
        new_acc.reserve(n);

        auto keep = [&](std::size_t i, const Gaussian& g, bool fresh) {
            points.push_back(g);
            new_acc.push_back(fresh ? GradAccumulator{} : acc[i]);
            if (adam) {
                new_m.push_back(fresh ? Gaussian::zero() : m[i]);
                new_v.push_back(fresh ? Gaussian::zero() : v[i]);
            }
        };

        for (std::size_t i = 0; i < n; ++i) {
            const Gaussian& g = cloud.points[i];
            const DensifyAction a = i < actions.size() ? actions[i] : DensifyAction::None;
            switch (a) {
            case DensifyAction::None:
                keep(i, g, false);
                break;
            case DensifyAction::Prune:
                ++stats.prunes;
                break;
            case DensifyAction::Clone: {
                ++stats.clones;
                keep(i, g, true);
                Gaussian c = g;
                const Eigen::Vector3d dir = acc[i].position_grad_sum;
                if (dir.norm() > 0.0)
                    c.position -= dir.normalized() * g.scale().maxCoeff();
                appended.push_back(c);
                break;
            }
            case DensifyAction::Split: {
                ++stats.splits;
                Gaussian a0 = g, a1 = g;
                a0.position = sample_inside(g, rng);
                a1.position = sample_inside(g, rng);
                const double shrink = std::log(cfg.split_scale_divisor);
                a0.log_scale.array() -= shrink;
                a1.log_scale.array() -= shrink;
                keep(i, a0, true);
                appended.push_back(a1);
                break;
            }
            }
        }
        for (const auto& g : appended) {
            points.push_back(g);
            new_acc.emplace_back();
            if (adam) {
                new_m.push_back(Gaussian::zero());
                new_v.push_back(Gaussian::zero());
            }
        }
        cloud.points = std::move(points);
        acc = std::move(new_acc);
        if (adam) {
            m = std::move(new_m);
            v = std::move(new_v);
        }
        return stats;
    }

    void reset_opacity(GaussianCloud& cloud, double max_alpha) {
        const double cap = logit(max_alpha);
        for (auto& g : cloud.points)
            g.opacity_logit = std::min(g.opacity_logit, cap);
    }

} // namespace bootsplat
