#include "bootsplat/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bootsplat::diffusion {

    DiffusionSchedule DiffusionSchedule::linear(int total_steps, double beta_start, double beta_end, int sampler_steps,
                                                double eta) {
        if (total_steps <= 0)
            throw std::invalid_argument("DiffusionSchedule: total_steps must be positive");
        DiffusionSchedule s;
        s.total_steps = total_steps;
        s.sampler_steps = sampler_steps;
        s.eta = eta;
        s.betas.resize(static_cast<std::size_t>(total_steps));
        s.alpha_bars.resize(static_cast<std::size_t>(total_steps) + 1);
        s.alpha_bars[0] = 1.0;
        for (int t = 0; t < total_steps; ++t) {
            const double f = total_steps == 1 ? 0.0 : static_cast<double>(t) / (total_steps - 1);
            s.betas[static_cast<std::size_t>(t)] = beta_start + f * (beta_end - beta_start);
            s.alpha_bars[static_cast<std::size_t>(t) + 1] = s.alpha_bars[static_cast<std::size_t>(t)] * (1.0 - s.betas[static_cast<std::size_t>(t)]);
        }
        return s;
    }

    std::vector<int> DiffusionSchedule::timesteps_from(int start, int steps) const {
        std::vector<int> ts;
        if (start <= 0)
            return {0};
        ts.push_back(start);
        steps = std::clamp(steps, 1, total_steps);
        for (int k = steps; k >= 0; --k) {
            const int t = static_cast<int>(static_cast<int64_t>(k) * total_steps / steps);
            if (t < start && t != ts.back())
                ts.push_back(t);
        }
        if (ts.back() != 0)
            ts.push_back(0);
        return ts;
    }

    int strength_to_start(double strength, int total_steps) {
        const long t = std::lround(static_cast<double>(total_steps) * strength);
        return static_cast<int>(std::clamp<long>(t, 0, total_steps));
    }

    ImageBuffer forward_noise(const ImageBuffer& x0, int t, const ImageBuffer& eps, const DiffusionSchedule& schedule) {
        if (!x0.same_shape(eps))
            throw std::invalid_argument("forward_noise: shape mismatch");
        const double ab = schedule.alpha_bar(t);
        const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
        ImageBuffer out(x0.width, x0.height);
        for (std::size_t i = 0; i < x0.size(); ++i)
            out.data[i] = a * x0.data[i] + b * eps.data[i];
        return out;
    }

    ImageBuffer ddim_step(const ImageBuffer& x_t, int t, int t_prev, const ImageBuffer& eps_hat, double eta,
                          const DiffusionSchedule& schedule, std::mt19937_64* rng) {
        const double ab_t = schedule.alpha_bar(t);
        const double ab_prev = schedule.alpha_bar(t_prev);
        const double sigma = eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
        const double dir_coef = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
        const double sqrt_ab_t = std::sqrt(ab_t);
        const double sqrt_1m_ab_t = std::sqrt(1.0 - ab_t);
        const double sqrt_ab_prev = std::sqrt(ab_prev);

        std::normal_distribution<double> normal(0.0, 1.0);
        ImageBuffer out(x_t.width, x_t.height);
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double x0_pred = (x_t.data[i] - sqrt_1m_ab_t * eps_hat.data[i]) / sqrt_ab_t;
            double v = sqrt_ab_prev * x0_pred + dir_coef * eps_hat.data[i];
            if (sigma > 0.0 && rng)
                v += sigma * normal(*rng);
            out.data[i] = v;
        }
        return out;
    }

    ImageBuffer ExactEpsOracle::predict(const ImageBuffer& x_t, int, const DiffusionSchedule&) {
        if (!eps_.same_shape(x_t))
            throw std::logic_error("ExactEpsOracle: no noise observed for this shape");
        return eps_;
    }

    ImageBuffer ZeroPredictor::predict(const ImageBuffer& x_t, int, const DiffusionSchedule&) {
        return ImageBuffer(x_t.width, x_t.height, 0.0);
    }

    ImageBuffer BlurSharpenHeuristic::predict(const ImageBuffer& x_t, int t, const DiffusionSchedule& schedule) {
        const double ab = schedule.alpha_bar(t);
        if (ab >= 1.0)
            return ImageBuffer(x_t.width, x_t.height, 0.0);
        const double sqrt_ab = std::sqrt(ab);
        const double noise_level = std::sqrt((1.0 - ab) / ab);
        const double range = range_sigma_ + 2.0 * noise_level;
        const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * spatial_sigma_)));

        ImageBuffer scaled(x_t.width, x_t.height);
        for (std::size_t i = 0; i < x_t.size(); ++i)
            scaled.data[i] = x_t.data[i] / sqrt_ab;

        ImageBuffer smooth(x_t.width, x_t.height);
        for (int y = 0; y < x_t.height; ++y)
            for (int x = 0; x < x_t.width; ++x) {
                double acc[3] = {0.0, 0.0, 0.0};
                double wsum = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int xx = reflect_index(x + dx, x_t.width);
                        const int yy = reflect_index(y + dy, x_t.height);
                        double d2 = 0.0;
                        for (int c = 0; c < 3; ++c) {
                            const double d = scaled.at(xx, yy, c) - scaled.at(x, y, c);
                            d2 += d * d;
                        }
                        const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (spatial_sigma_ * spatial_sigma_) -
                                                  0.5 * d2 / (range * range));
                        wsum += w;
                        for (int c = 0; c < 3; ++c)
                            acc[c] += w * scaled.at(xx, yy, c);
                    }
                for (int c = 0; c < 3; ++c)
                    smooth.at(x, y, c) = acc[c] / wsum;
            }

        // eps such that (x_t - sqrt(1 - abar) eps) / sqrt(abar) == smooth.
        const double b = std::sqrt(1.0 - ab);
        ImageBuffer eps(x_t.width, x_t.height);
        for (std::size_t i = 0; i < x_t.size(); ++i)
            eps.data[i] = (x_t.data[i] - sqrt_ab * smooth.data[i]) / b;
        return eps;
    }

    ImageBuffer gaussian_noise(int width, int height, std::mt19937_64& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        ImageBuffer eps(width, height);
        for (auto& v : eps.data)
            v = normal(rng);
        return eps;
    }

    ImageBuffer regenerate(const RegenRequest& req, NoisePredictor& predictor, const DiffusionSchedule& schedule) {
        if (!(req.strength >= 0.0 && req.strength <= 1.0))
            throw std::invalid_argument("regenerate: strength must be in [0, 1]");
        const int start = strength_to_start(req.strength, schedule.total_steps);
        if (start == 0)
            return req.image;

        std::mt19937_64 rng(req.seed);
        const ImageBuffer eps = gaussian_noise(req.image.width, req.image.height, rng);
        predictor.observe_noise(eps);
        ImageBuffer x = forward_noise(req.image, start, eps, schedule);

        const auto ts = schedule.timesteps_from(start, req.steps > 0 ? req.steps : schedule.sampler_steps);
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            const ImageBuffer eps_hat = predictor.predict(x, ts[i], schedule);
            x = ddim_step(x, ts[i], ts[i + 1], eps_hat, schedule.eta, schedule, &rng);
        }
        clamp01(x);
        return x;
    }

    double simple_loss(const ImageBuffer& x0, int t, const ImageBuffer& eps, NoisePredictor& predictor,
                       const DiffusionSchedule& schedule) {
        const ImageBuffer x_t = forward_noise(x0, t, eps, schedule);
        const ImageBuffer pred = predictor.predict(x_t, t, schedule);
        double s = 0.0;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            const double d = eps.data[i] - pred.data[i];
            s += d * d;
        }
        return s;
    }

} // namespace bootsplat::diffusion
