#include "bootsplat/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bootsplat {

    double LearningRates::position_at(int64_t iteration) const {
        if (position_init <= 0.0 || position_final <= 0.0)
            return 0.0;
        const double t = std::clamp(static_cast<double>(iteration) / static_cast<double>(std::max<int64_t>(1, position_max_steps)), 0.0, 1.0);
        return spatial_scale * std::exp((1.0 - t) * std::log(position_init) + t * std::log(position_final));
    }

    double LearningRates::for_group(ParamGroup group, int64_t iteration) const {
        switch (group) {
        case ParamGroup::Position: return position_at(iteration);
        case ParamGroup::Rotation: return rotation;
        case ParamGroup::Scale: return scale;
        case ParamGroup::Opacity: return opacity;
        case ParamGroup::Color: return color;
        case ParamGroup::SH: return sh;
        }
        return 0.0;
    }

    LearningRates LearningRates::zero() {
        LearningRates lr;
        lr.position_init = lr.position_final = 0.0;
        lr.rotation = lr.scale = lr.opacity = lr.color = lr.sh = 0.0;
        return lr;
    }

    void Adam::step(GaussianCloud& cloud, const CloudGradients& grads, const LearningRates& lr, int64_t iteration) {
        if (grads.params.size() != cloud.size())
            throw std::invalid_argument("Adam::step: gradient count does not match cloud");
        m_.resize(cloud.size(), Gaussian::zero());
        v_.resize(cloud.size(), Gaussian::zero());
        ++t_;
        const double bc1 = 1.0 - std::pow(lr.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(lr.beta2, static_cast<double>(t_));

        double group_lr[6];
        for (int g = 0; g < 6; ++g)
            group_lr[g] = lr.for_group(static_cast<ParamGroup>(g), iteration);

        for (std::size_t i = 0; i < cloud.size(); ++i) {
            Gaussian& p = cloud.points[i];
            Gaussian g = grads.params[i];
            Gaussian& m = m_[i];
            Gaussian& v = v_[i];
            // Walk the four records in lockstep through a flat view.
            double* pv[kParamsPerGaussian];
            double* mv[kParamsPerGaussian];
            double* vv[kParamsPerGaussian];
            double gv[kParamsPerGaussian];
            ParamGroup groups[kParamsPerGaussian];
            std::size_t k = 0;
            for_each_param(p, [&](ParamGroup grp, double& x) { groups[k] = grp; pv[k++] = &x; });
            k = 0;
            for_each_param(m, [&](ParamGroup, double& x) { mv[k++] = &x; });
            k = 0;
            for_each_param(v, [&](ParamGroup, double& x) { vv[k++] = &x; });
            k = 0;
            for_each_param(g, [&](ParamGroup, double& x) { gv[k++] = x; });

            bool rotated = false;
            for (std::size_t j = 0; j < kParamsPerGaussian; ++j) {
                const double rate = group_lr[static_cast<int>(groups[j])];
                *mv[j] = lr.beta1 * *mv[j] + (1.0 - lr.beta1) * gv[j];
                *vv[j] = lr.beta2 * *vv[j] + (1.0 - lr.beta2) * gv[j] * gv[j];
                const double update = rate * (*mv[j] / bc1) / (std::sqrt(*vv[j] / bc2) + lr.eps);
                if (update != 0.0) {
                    *pv[j] -= update;
                    rotated = rotated || groups[j] == ParamGroup::Rotation;
                }
            }
            if (rotated)
                p.rotation = normalize_quat(p.rotation);
        }
    }

} // namespace bootsplat
