#pragma once

#include <cstddef>
#include <vector>

namespace bootsplat {

    /// H x W x 3 image, row-major, channels interleaved. Values are nominally in
    /// [0,1] but the diffusion code also stores unbounded noise tensors here.
    struct ImageBuffer {
        int width = 0;
        int height = 0;
        std::vector<double> data;

        ImageBuffer() = default;
        ImageBuffer(int w, int h, double fill = 0.0)
            : width(w),
              height(h),
              data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

        std::size_t index(int x, int y, int c) const {
            return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                    static_cast<std::size_t>(x)) * 3 +
                   static_cast<std::size_t>(c);
        }
        double& at(int x, int y, int c) { return data[index(x, y, c)]; }
        double at(int x, int y, int c) const { return data[index(x, y, c)]; }

        std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
        std::size_t size() const { return data.size(); }
        bool empty() const { return data.empty(); }
        bool same_shape(const ImageBuffer& o) const { return width == o.width && height == o.height; }
    };

    void clamp01(ImageBuffer& img);

    /// Separable Gaussian blur with mirror-reflect borders. Kernel radius is
    /// ceil(3 sigma).
    ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

    /// Bilinear resampling to an arbitrary size, pixel-center aligned, edge clamped.
    ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height);

    /// Bicubic (Keys, a = -0.5) resampling, pixel-center aligned, edge clamped.
    ImageBuffer resize_bicubic(const ImageBuffer& img, int width, int height);

    double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b);
    double l2_distance(const ImageBuffer& a, const ImageBuffer& b);
    double mean_abs_diff(const ImageBuffer& a, const ImageBuffer& b);

    /// Mirror index into [0, n) without repeating the edge sample (d c b | a b c d).
    int reflect_index(int i, int n);

} // namespace bootsplat
