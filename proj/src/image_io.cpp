#include "bootsplat/image_io.hpp"
#include "bootsplat/errors.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bootsplat {

    uint8_t to_byte(double v) {
        return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }

    double from_byte(uint8_t b) { return static_cast<double>(b) / 255.0; }

    namespace {

        struct ReadCursor {
            std::span<const uint8_t> bytes;
            std::size_t offset = 0;
        };

        void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
            auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
            if (cur->offset + count > cur->bytes.size())
                png_error(png, "truncated PNG stream");
            std::memcpy(out, cur->bytes.data() + cur->offset, count);
            cur->offset += count;
        }

        void png_write_to_vector(png_structp png, png_bytep data, png_size_t count) {
            auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
            out->insert(out->end(), data, data + count);
        }

        void png_flush_noop(png_structp) {}

        void png_error_throw(png_structp png, png_const_charp msg) {
            auto* err = static_cast<std::string*>(png_get_error_ptr(png));
            if (err)
                *err = msg;
            png_longjmp(png, 1);
        }

        void png_warning_ignore(png_structp, png_const_charp) {}

    } // namespace

    std::vector<uint8_t> encode_png(const ImageBuffer& img) {
        if (img.width <= 0 || img.height <= 0)
            throw ImageIoError("encode_png: empty image");

        std::vector<uint8_t> rgb(img.size());
        std::transform(img.data.begin(), img.data.end(), rgb.begin(), to_byte);

        std::string err;
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
        if (!png)
            throw ImageIoError("png_create_write_struct failed");
        png_infop info = png_create_info_struct(png);
        std::vector<uint8_t> out;
        std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw ImageIoError("PNG encode failed: " + err);
        }
        png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                     PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        for (int y = 0; y < img.height; ++y)
            rows[static_cast<std::size_t>(y)] = rgb.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) * 3;
        png_set_rows(png, info, rows.data());
        png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
        png_destroy_write_struct(&png, &info);
        return out;
    }

    ImageBuffer decode_png(std::span<const uint8_t> bytes) {
        if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
            throw ImageIoError("not a PNG stream");

        std::string err;
        png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
        if (!png)
            throw ImageIoError("png_create_read_struct failed");
        png_infop info = png_create_info_struct(png);
        ReadCursor cursor{bytes, 0};
        ImageBuffer img;
        std::vector<uint8_t> pixels;
        std::vector<png_bytep> rows;
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw ImageIoError("PNG decode failed: " + err);
        }
        png_set_read_fn(png, &cursor, png_read_from_memory);
        png_read_info(png, info);

        const png_uint_32 w = png_get_image_width(png, info);
        const png_uint_32 h = png_get_image_height(png, info);
        const int color_type = png_get_color_type(png, info);
        const int bit_depth = png_get_bit_depth(png, info);

        if (bit_depth == 16)
            png_set_strip_16(png);
        if (color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (color_type & PNG_COLOR_MASK_ALPHA)
            png_set_strip_alpha(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS))
            png_set_strip_alpha(png);
        png_read_update_info(png, info);

        const std::size_t stride = png_get_rowbytes(png, info);
        pixels.resize(stride * h);
        rows.resize(h);
        for (png_uint_32 y = 0; y < h; ++y)
            rows[y] = pixels.data() + y * stride;
        png_read_image(png, rows.data());
        png_destroy_read_struct(&png, &info, nullptr);

        img = ImageBuffer(static_cast<int>(w), static_cast<int>(h));
        for (png_uint_32 y = 0; y < h; ++y)
            for (png_uint_32 x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(static_cast<int>(x), static_cast<int>(y), c) = from_byte(pixels[y * stride + x * 3 + static_cast<std::size_t>(c)]);
        return img;
    }

    ImageBuffer load_image(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw ImageIoError("cannot open image " + path.string());
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        try {
            return decode_png(bytes);
        } catch (const ImageIoError& e) {
            throw ImageIoError(path.string() + ": " + e.what());
        }
    }

    void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
        const auto bytes = encode_png(img);
        if (path.has_parent_path())
            std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw ImageIoError("cannot write image " + path.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f)
            throw ImageIoError("short write on " + path.string());
    }

    namespace {
        constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

        int decode_char(char c) {
            if (c >= 'A' && c <= 'Z')
                return c - 'A';
            if (c >= 'a' && c <= 'z')
                return c - 'a' + 26;
            if (c >= '0' && c <= '9')
                return c - '0' + 52;
            if (c == '+')
                return 62;
            if (c == '/')
                return 63;
            return -1;
        }
    } // namespace

    std::string base64_encode(std::span<const uint8_t> bytes) {
        std::string out;
        out.reserve((bytes.size() + 2) / 3 * 4);
        std::size_t i = 0;
        for (; i + 2 < bytes.size(); i += 3) {
            const uint32_t v = (uint32_t{bytes[i]} << 16) | (uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
            out += kAlphabet[(v >> 18) & 63];
            out += kAlphabet[(v >> 12) & 63];
            out += kAlphabet[(v >> 6) & 63];
            out += kAlphabet[v & 63];
        }
        const std::size_t rest = bytes.size() - i;
        if (rest == 1) {
            const uint32_t v = uint32_t{bytes[i]} << 16;
            out += kAlphabet[(v >> 18) & 63];
            out += kAlphabet[(v >> 12) & 63];
            out += "==";
        } else if (rest == 2) {
            const uint32_t v = (uint32_t{bytes[i]} << 16) | (uint32_t{bytes[i + 1]} << 8);
            out += kAlphabet[(v >> 18) & 63];
            out += kAlphabet[(v >> 12) & 63];
            out += kAlphabet[(v >> 6) & 63];
            out += '=';
        }
        return out;
    }

    std::vector<uint8_t> base64_decode(std::string_view text) {
        if (text.size() % 4 != 0)
            throw ImageIoError("base64: length is not a multiple of 4");
        std::vector<uint8_t> out;
        out.reserve(text.size() / 4 * 3);
        for (std::size_t i = 0; i < text.size(); i += 4) {
            std::array<int, 4> q{};
            int pad = 0;
            for (std::size_t k = 0; k < 4; ++k) {
                const char c = text[i + k];
                if (c == '=') {
                    if (i + 4 != text.size() || k < 2)
                        throw ImageIoError("base64: misplaced padding");
                    ++pad;
                    q[k] = 0;
                    continue;
                }
                if (pad > 0)
                    throw ImageIoError("base64: data after padding");
                q[k] = decode_char(c);
                if (q[k] < 0)
                    throw ImageIoError("base64: invalid character");
            }
            const uint32_t v = (static_cast<uint32_t>(q[0]) << 18) | (static_cast<uint32_t>(q[1]) << 12) |
                               (static_cast<uint32_t>(q[2]) << 6) | static_cast<uint32_t>(q[3]);
            out.push_back(static_cast<uint8_t>(v >> 16));
            if (pad < 2)
                out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
            if (pad < 1)
                out.push_back(static_cast<uint8_t>(v & 0xff));
        }
        return out;
    }

    std::string to_b64(const ImageBuffer& img) { return base64_encode(encode_png(img)); }

    ImageBuffer from_b64(std::string_view text) { return decode_png(base64_decode(text)); }

} // namespace bootsplat
