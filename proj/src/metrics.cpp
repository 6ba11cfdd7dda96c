#include "bootsplat/metrics.hpp"

#include <json.hpp>

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bootsplat {

    double psnr(const ImageBuffer& a, const ImageBuffer& b) {
        if (!a.same_shape(b))
            throw std::invalid_argument("psnr: shape mismatch");
        double se = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a.data[i] - b.data[i];
            se += d * d;
        }
        const double mse = se / static_cast<double>(a.size());
        if (mse == 0.0)
            return std::numeric_limits<double>::infinity();
        return 10.0 * std::log10(1.0 / mse);
    }

    namespace {

        struct Plane {
            int w = 0, h = 0;
            std::vector<double> v;
            Plane(int w_, int h_)
                : w(w_),
                  h(h_),
                  v(static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_), 0.0) {}
            double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)]; }
            double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)]; }
        };

        std::vector<double> kernel_1d(const SsimParams& p) {
            const int r = p.window / 2;
            std::vector<double> k(static_cast<std::size_t>(p.window));
            double s = 0.0;
            for (int i = -r; i <= r; ++i) {
                k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (p.sigma * p.sigma));
                s += k[static_cast<std::size_t>(i + r)];
            }
            for (auto& x : k)
                x /= s;
            return k;
        }

        Plane filter(const Plane& in, const std::vector<double>& k) {
            const int r = static_cast<int>(k.size() / 2);
            Plane tmp(in.w, in.h), out(in.w, in.h);
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i)
                        acc += k[static_cast<std::size_t>(i + r)] * in(reflect_index(x + i, in.w), y);
                    tmp(x, y) = acc;
                }
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i)
                        acc += k[static_cast<std::size_t>(i + r)] * tmp(x, reflect_index(y + i, in.h));
                    out(x, y) = acc;
                }
            return out;
        }

        // Adjoint of filter(): scatter instead of gather, passes in reverse order.
        Plane filter_adjoint(const Plane& in, const std::vector<double>& k) {
            const int r = static_cast<int>(k.size() / 2);
            Plane tmp(in.w, in.h), out(in.w, in.h);
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x)
                    for (int i = -r; i <= r; ++i)
                        tmp(x, reflect_index(y + i, in.h)) += k[static_cast<std::size_t>(i + r)] * in(x, y);
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x)
                    for (int i = -r; i <= r; ++i)
                        out(reflect_index(x + i, in.w), y) += k[static_cast<std::size_t>(i + r)] * tmp(x, y);
            return out;
        }

        Plane channel(const ImageBuffer& img, int c) {
            Plane p(img.width, img.height);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    p(x, y) = img.at(x, y, c);
            return p;
        }

        double ssim_impl(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad, const SsimParams& params) {
            if (!a.same_shape(b))
                throw std::invalid_argument("ssim: shape mismatch");
            const auto k = kernel_1d(params);
            const double n = static_cast<double>(a.size());
            double total = 0.0;
            if (grad)
                *grad = ImageBuffer(a.width, a.height);

            for (int c = 0; c < 3; ++c) {
                const Plane pa = channel(a, c), pb = channel(b, c);
                Plane aa(a.width, a.height), bb(a.width, a.height), ab(a.width, a.height);
                for (std::size_t i = 0; i < pa.v.size(); ++i) {
                    aa.v[i] = pa.v[i] * pa.v[i];
                    bb.v[i] = pb.v[i] * pb.v[i];
                    ab.v[i] = pa.v[i] * pb.v[i];
                }
                const Plane mu_a = filter(pa, k), mu_b = filter(pb, k);
                const Plane e_aa = filter(aa, k), e_bb = filter(bb, k), e_ab = filter(ab, k);

                Plane d_mu(a.width, a.height), d_eaa(a.width, a.height), d_eab(a.width, a.height);
                for (std::size_t i = 0; i < pa.v.size(); ++i) {
                    const double ma = mu_a.v[i], mb = mu_b.v[i];
                    const double var_a = e_aa.v[i] - ma * ma;
                    const double var_b = e_bb.v[i] - mb * mb;
                    const double cov = e_ab.v[i] - ma * mb;
                    const double A1 = 2.0 * ma * mb + params.c1;
                    const double A2 = 2.0 * cov + params.c2;
                    const double B1 = ma * ma + mb * mb + params.c1;
                    const double B2 = var_a + var_b + params.c2;
                    total += (A1 * A2) / (B1 * B2);
                    if (grad) {
                        const double B = B1 * B2;
                        d_mu.v[i] = ((2.0 * mb * A2 - 2.0 * mb * A1) * B - A1 * A2 * (2.0 * ma * B2 - 2.0 * ma * B1)) / (B * B);
                        d_eaa.v[i] = -A1 * A2 / (B1 * B2 * B2);
                        d_eab.v[i] = 2.0 * A1 / B;
                    }
                }
                if (grad) {
                    const Plane g_mu = filter_adjoint(d_mu, k);
                    const Plane g_aa = filter_adjoint(d_eaa, k);
                    const Plane g_ab = filter_adjoint(d_eab, k);
                    for (int y = 0; y < a.height; ++y)
                        for (int x = 0; x < a.width; ++x)
                            grad->at(x, y, c) = (g_mu(x, y) + 2.0 * pa(x, y) * g_aa(x, y) + pb(x, y) * g_ab(x, y)) / n;
                }
            }
            return total / n;
        }

    } // namespace

    double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params) {
        return ssim_impl(a, b, nullptr, params);
    }

    double ssim_with_grad(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer& dssim_da, const SsimParams& params) {
        return ssim_impl(a, b, &dssim_da, params);
    }

    namespace {
        nlohmann::json psnr_json(double v) {
            if (std::isinf(v))
                return "inf";
            return v;
        }
    } // namespace

    std::string MetricReport::to_json() const {
        nlohmann::json j;
        j["scene"] = scene;
        j["iteration"] = iteration;
        j["psnr"] = psnr_json(psnr);
        j["ssim"] = ssim;
        j["lpips"] = "n/a";
        j["per_image"] = nlohmann::json::array();
        for (const auto& m : per_image)
            j["per_image"].push_back({{"name", m.name}, {"psnr", psnr_json(m.psnr)}, {"ssim", m.ssim}, {"lpips", "n/a"}});
        return j.dump(2);
    }

    MetricReport summarize(std::string scene, uint64_t iteration, std::vector<ImageMetric> per_image) {
        MetricReport r;
        r.scene = std::move(scene);
        r.iteration = iteration;
        for (const auto& m : per_image) {
            r.psnr += m.psnr;
            r.ssim += m.ssim;
        }
        if (!per_image.empty()) {
            r.psnr /= static_cast<double>(per_image.size());
            r.ssim /= static_cast<double>(per_image.size());
        }
        r.per_image = std::move(per_image);
        return r;
    }

} // namespace bootsplat
