#include "bootsplat/image.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace bootsplat {

    int reflect_index(int i, int n) {
        if (n == 1)
            return 0;
        const int period = 2 * (n - 1);
        i %= period;
        if (i < 0)
            i += period;
        return i < n ? i : period - i;
    }

    void clamp01(ImageBuffer& img) {
        for (auto& v : img.data)
            v = std::clamp(v, 0.0, 1.0);
    }

    namespace {

        std::vector<double> gaussian_kernel(double sigma) {
            const int radius = static_cast<int>(std::ceil(3.0 * sigma));
            std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
            double sum = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const double w = std::exp(-0.5 * i * i / (sigma * sigma));
                k[static_cast<std::size_t>(i + radius)] = w;
                sum += w;
            }
            for (auto& w : k)
                w /= sum;
            return k;
        }

        // Keys cubic convolution weight.
        double cubic_weight(double x) {
            constexpr double a = -0.5;
            x = std::abs(x);
            if (x <= 1.0)
                return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
            if (x < 2.0)
                return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
            return 0.0;
        }

    } // namespace

    ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
        if (sigma <= 0.0)
            return img;
        const auto k = gaussian_kernel(sigma);
        const int radius = static_cast<int>(k.size() / 2);
        ImageBuffer tmp(img.width, img.height);
        ImageBuffer out(img.width, img.height);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += k[static_cast<std::size_t>(i + radius)] * img.at(reflect_index(x + i, img.width), y, c);
                    tmp.at(x, y, c) = acc;
                }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += k[static_cast<std::size_t>(i + radius)] * tmp.at(x, reflect_index(y + i, img.height), c);
                    out.at(x, y, c) = acc;
                }
        return out;
    }

    ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("resize_bilinear: target size must be positive");
        ImageBuffer out(width, height);
        const double sx = static_cast<double>(img.width) / width;
        const double sy = static_cast<double>(img.height) / height;
        for (int y = 0; y < height; ++y) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
            const int y0 = static_cast<int>(std::floor(fy));
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double wy = fy - y0;
            for (int x = 0; x < width; ++x) {
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
                const int x0 = static_cast<int>(std::floor(fx));
                const int x1 = std::min(x0 + 1, img.width - 1);
                const double wx = fx - x0;
                for (int c = 0; c < 3; ++c) {
                    const double top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
                    const double bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
                    out.at(x, y, c) = (1.0 - wy) * top + wy * bot;
                }
            }
        }
        return out;
    }

    ImageBuffer resize_bicubic(const ImageBuffer& img, int width, int height) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("resize_bicubic: target size must be positive");
        ImageBuffer out(width, height);
        const double sx = static_cast<double>(img.width) / width;
        const double sy = static_cast<double>(img.height) / height;
        for (int y = 0; y < height; ++y) {
            const double fy = (y + 0.5) * sy - 0.5;
            const int iy = static_cast<int>(std::floor(fy));
            for (int x = 0; x < width; ++x) {
                const double fx = (x + 0.5) * sx - 0.5;
                const int ix = static_cast<int>(std::floor(fx));
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int j = -1; j <= 2; ++j) {
                        const double wy = cubic_weight(fy - (iy + j));
                        const int yy = std::clamp(iy + j, 0, img.height - 1);
                        for (int i = -1; i <= 2; ++i) {
                            const double wx = cubic_weight(fx - (ix + i));
                            const int xx = std::clamp(ix + i, 0, img.width - 1);
                            acc += wx * wy * img.at(xx, yy, c);
                        }
                    }
                    out.at(x, y, c) = acc;
                }
            }
        }
        return out;
    }

    double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
        assert(a.same_shape(b));
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            m = std::max(m, std::abs(a.data[i] - b.data[i]));
        return m;
    }

    double l2_distance(const ImageBuffer& a, const ImageBuffer& b) {
        assert(a.same_shape(b));
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a.data[i] - b.data[i];
            s += d * d;
        }
        return std::sqrt(s);
    }

    double mean_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
        assert(a.same_shape(b));
        if (a.empty())
            return 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += std::abs(a.data[i] - b.data[i]);
        return s / static_cast<double>(a.size());
    }

} // namespace bootsplat
