#include "bootsplat/colmap_io.hpp"
#include "bootsplat/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>

namespace bootsplat::colmap {

    using Kind = ColmapError::Kind;

    const char* model_name(CameraModel model) {
        switch (model) {
        case CameraModel::SimplePinhole: return "SIMPLE_PINHOLE";
        case CameraModel::Pinhole: return "PINHOLE";
        }
        return "UNKNOWN";
    }

    std::size_t model_param_count(CameraModel model) {
        return model == CameraModel::SimplePinhole ? 3 : 4;
    }

    namespace {

        // -----------------------------------------------------------------------------
        //  Little-endian binary cursor
        // -----------------------------------------------------------------------------
        class Reader {
        public:
            Reader(std::span<const uint8_t> bytes, const char* what)
                : bytes_(bytes),
                  what_(what) {}

            template <typename T>
            T read() {
                static_assert(std::is_trivially_copyable_v<T>);
                require(sizeof(T));
                T v;
                std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
                pos_ += sizeof(T);
                return v;
            }

            std::string read_cstring() {
                const auto* begin = bytes_.data() + pos_;
                const auto* end = bytes_.data() + bytes_.size();
                const auto* nul = std::find(begin, end, uint8_t{0});
                if (nul == end)
                    throw ColmapError(Kind::TruncatedInput, std::string(what_) + ": unterminated image name");
                std::string s(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nul - begin));
                pos_ += s.size() + 1;
                return s;
            }

            void skip(uint64_t n) {
                require(n);
                pos_ += n;
            }

            std::size_t remaining() const { return bytes_.size() - pos_; }

        private:
            void require(uint64_t n) const {
                if (n > bytes_.size() - pos_)
                    throw ColmapError(Kind::TruncatedInput, std::string(what_) + ": payload shorter than declared record count");
            }

            std::span<const uint8_t> bytes_;
            std::size_t pos_ = 0;
            const char* what_;
        };

        class Writer {
        public:
            template <typename T>
            void write(const T& v) {
                static_assert(std::is_trivially_copyable_v<T>);
                const auto* p = reinterpret_cast<const uint8_t*>(&v);
                out.insert(out.end(), p, p + sizeof(T));
            }
            void write_cstring(const std::string& s) {
                out.insert(out.end(), s.begin(), s.end());
                out.push_back(0);
            }
            std::vector<uint8_t> out;
        };

        CameraModel checked_model(int64_t id) {
            if (id != static_cast<int64_t>(CameraModel::SimplePinhole) && id != static_cast<int64_t>(CameraModel::Pinhole))
                throw ColmapError(Kind::UnsupportedModel, "unsupported camera model id " + std::to_string(id));
            return static_cast<CameraModel>(id);
        }

        CameraModel model_from_name(const std::string& name) {
            if (name == "SIMPLE_PINHOLE")
                return CameraModel::SimplePinhole;
            if (name == "PINHOLE")
                return CameraModel::Pinhole;
            throw ColmapError(Kind::UnsupportedModel, "unsupported camera model " + name);
        }

        void validate(const CameraIntrinsics& cam) {
            if (cam.width == 0 || cam.height == 0)
                throw ColmapError(Kind::Malformed, "camera " + std::to_string(cam.camera_id) + ": zero image size");
            if (cam.params.size() != model_param_count(cam.model))
                throw ColmapError(Kind::Malformed, "camera " + std::to_string(cam.camera_id) + ": wrong parameter count");
            if (!(cam.fx() > 0.0) || !(cam.fy() > 0.0))
                throw ColmapError(Kind::Malformed, "camera " + std::to_string(cam.camera_id) + ": focal length must be positive");
        }

        // -----------------------------------------------------------------------------
        //  Text helpers
        // -----------------------------------------------------------------------------
        std::string trim(const std::string& s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        }

        // Reads the "# Number of X: N" header COLMAP writes, if present.
        std::optional<uint64_t> declared_count(const std::string& line, const char* key) {
            const auto pos = line.find(key);
            if (pos == std::string::npos)
                return std::nullopt;
            std::istringstream ss(line.substr(pos + std::strlen(key)));
            uint64_t n = 0;
            if (ss >> n)
                return n;
            return std::nullopt;
        }

        struct TextLines {
            std::vector<std::string> lines;
            explicit TextLines(std::span<const uint8_t> bytes) {
                std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
                std::istringstream ss(text);
                std::string line;
                while (std::getline(ss, line))
                    lines.push_back(line);
            }
        };

        void check_declared(std::optional<uint64_t> declared, std::size_t got, const char* what) {
            if (declared && *declared > got)
                throw ColmapError(Kind::TruncatedInput, std::string(what) + ": declared " + std::to_string(*declared) +
                                                            " records but found " + std::to_string(got));
        }

        template <typename T>
        T parse_field(std::istringstream& ss, const char* what) {
            T v{};
            if (!(ss >> v))
                throw ColmapError(Kind::Malformed, std::string(what) + ": malformed record");
            return v;
        }

        std::ostringstream text_stream() {
            std::ostringstream ss;
            ss << std::setprecision(std::numeric_limits<double>::max_digits10);
            return ss;
        }

        std::vector<uint8_t> to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

    } // namespace

    // -----------------------------------------------------------------------------
    //  cameras
    // -----------------------------------------------------------------------------
    std::vector<CameraIntrinsics> parse_cameras(std::span<const uint8_t> bytes, Format format) {
        std::vector<CameraIntrinsics> cams;
        if (format == Format::Binary) {
            Reader r(bytes, "cameras.bin");
            const auto n = r.read<uint64_t>();
            // Each record is at least 24 bytes; reject absurd counts before reserving.
            if (n > r.remaining() / 24)
                throw ColmapError(Kind::TruncatedInput, "cameras.bin: payload shorter than declared record count");
            cams.reserve(n);
            for (uint64_t i = 0; i < n; ++i) {
                CameraIntrinsics cam;
                cam.camera_id = r.read<uint32_t>();
                cam.model = checked_model(r.read<int32_t>());
                cam.width = r.read<uint64_t>();
                cam.height = r.read<uint64_t>();
                cam.params.resize(model_param_count(cam.model));
                for (auto& p : cam.params)
                    p = r.read<double>();
                validate(cam);
                cams.push_back(std::move(cam));
            }
            return cams;
        }

        std::optional<uint64_t> declared;
        for (const auto& raw : TextLines(bytes).lines) {
            const auto line = trim(raw);
            if (line.empty())
                continue;
            if (line[0] == '#') {
                if (auto d = declared_count(line, "Number of cameras:"))
                    declared = d;
                continue;
            }
            std::istringstream ss(line);
            CameraIntrinsics cam;
            cam.camera_id = parse_field<uint32_t>(ss, "cameras.txt");
            cam.model = model_from_name(parse_field<std::string>(ss, "cameras.txt"));
            cam.width = parse_field<uint64_t>(ss, "cameras.txt");
            cam.height = parse_field<uint64_t>(ss, "cameras.txt");
            double p;
            while (ss >> p)
                cam.params.push_back(p);
            validate(cam);
            cams.push_back(std::move(cam));
        }
        check_declared(declared, cams.size(), "cameras.txt");
        return cams;
    }

    std::vector<uint8_t> write_cameras(std::span<const CameraIntrinsics> cameras, Format format) {
        if (format == Format::Binary) {
            Writer w;
            w.write<uint64_t>(cameras.size());
            for (const auto& cam : cameras) {
                w.write<uint32_t>(cam.camera_id);
                w.write<int32_t>(static_cast<int32_t>(cam.model));
                w.write<uint64_t>(cam.width);
                w.write<uint64_t>(cam.height);
                for (double p : cam.params)
                    w.write<double>(p);
            }
            return std::move(w.out);
        }
        auto ss = text_stream();
        ss << "# Camera list with one line of data per camera:\n"
           << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
           << "# Number of cameras: " << cameras.size() << "\n";
        for (const auto& cam : cameras) {
            ss << cam.camera_id << ' ' << model_name(cam.model) << ' ' << cam.width << ' ' << cam.height;
            for (double p : cam.params)
                ss << ' ' << p;
            ss << '\n';
        }
        return to_bytes(ss.str());
    }

    // -----------------------------------------------------------------------------
    //  images
    // -----------------------------------------------------------------------------
    std::vector<ImageRecord> parse_images(std::span<const uint8_t> bytes, Format format) {
        std::vector<ImageRecord> images;
        if (format == Format::Binary) {
            Reader r(bytes, "images.bin");
            const auto n = r.read<uint64_t>();
            if (n > r.remaining() / 64)
                throw ColmapError(Kind::TruncatedInput, "images.bin: payload shorter than declared record count");
            images.reserve(n);
            for (uint64_t i = 0; i < n; ++i) {
                ImageRecord img;
                img.image_id = r.read<uint32_t>();
                for (int k = 0; k < 4; ++k)
                    img.pose.qvec[k] = r.read<double>();
                for (int k = 0; k < 3; ++k)
                    img.pose.tvec[k] = r.read<double>();
                img.pose.qvec = normalize_quat(img.pose.qvec);
                img.camera_id = r.read<uint32_t>();
                img.name = r.read_cstring();
                const auto npts = r.read<uint64_t>();
                constexpr uint64_t kObsBytes = 2 * sizeof(double) + sizeof(uint64_t);
                if (npts > r.remaining() / kObsBytes)
                    throw ColmapError(Kind::TruncatedInput, "images.bin: truncated 2D observation list");
                r.skip(npts * kObsBytes);
                images.push_back(std::move(img));
            }
            return images;
        }

        std::optional<uint64_t> declared;
        const auto lines = TextLines(bytes).lines;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto line = trim(lines[i]);
            if (line.empty())
                continue;
            if (line[0] == '#') {
                if (auto d = declared_count(line, "Number of images:"))
                    declared = d;
                continue;
            }
            std::istringstream ss(line);
            ImageRecord img;
            img.image_id = parse_field<uint32_t>(ss, "images.txt");
            for (int k = 0; k < 4; ++k)
                img.pose.qvec[k] = parse_field<double>(ss, "images.txt");
            for (int k = 0; k < 3; ++k)
                img.pose.tvec[k] = parse_field<double>(ss, "images.txt");
            img.pose.qvec = normalize_quat(img.pose.qvec);
            img.camera_id = parse_field<uint32_t>(ss, "images.txt");
            img.name = parse_field<std::string>(ss, "images.txt");
            images.push_back(std::move(img));
            // The observation line follows unconditionally and may be blank.
            ++i;
        }
        check_declared(declared, images.size(), "images.txt");
        return images;
    }

    std::vector<uint8_t> write_images(std::span<const ImageRecord> images, Format format) {
        if (format == Format::Binary) {
            Writer w;
            w.write<uint64_t>(images.size());
            for (const auto& img : images) {
                w.write<uint32_t>(img.image_id);
                for (int k = 0; k < 4; ++k)
                    w.write<double>(img.pose.qvec[k]);
                for (int k = 0; k < 3; ++k)
                    w.write<double>(img.pose.tvec[k]);
                w.write<uint32_t>(img.camera_id);
                w.write_cstring(img.name);
                w.write<uint64_t>(0);
            }
            return std::move(w.out);
        }
        auto ss = text_stream();
        ss << "# Image list with two lines of data per image:\n"
           << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
           << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
           << "# Number of images: " << images.size() << ", mean observations per image: 0\n";
        for (const auto& img : images) {
            ss << img.image_id;
            for (int k = 0; k < 4; ++k)
                ss << ' ' << img.pose.qvec[k];
            for (int k = 0; k < 3; ++k)
                ss << ' ' << img.pose.tvec[k];
            ss << ' ' << img.camera_id << ' ' << img.name << "\n\n";
        }
        return to_bytes(ss.str());
    }

    // -----------------------------------------------------------------------------
    //  points3D
    // -----------------------------------------------------------------------------
    std::vector<SparsePoint> parse_points3d(std::span<const uint8_t> bytes, Format format) {
        std::vector<SparsePoint> points;
        if (format == Format::Binary) {
            Reader r(bytes, "points3D.bin");
            const auto n = r.read<uint64_t>();
            if (n > r.remaining() / 43)
                throw ColmapError(Kind::TruncatedInput, "points3D.bin: payload shorter than declared record count");
            points.reserve(n);
            for (uint64_t i = 0; i < n; ++i) {
                SparsePoint p;
                p.point_id = r.read<uint64_t>();
                for (int k = 0; k < 3; ++k)
                    p.position[k] = r.read<double>();
                for (int k = 0; k < 3; ++k)
                    p.color[static_cast<std::size_t>(k)] = r.read<uint8_t>();
                p.error = r.read<double>();
                const auto track = r.read<uint64_t>();
                if (track > r.remaining() / 8)
                    throw ColmapError(Kind::TruncatedInput, "points3D.bin: truncated track");
                r.skip(track * 2 * sizeof(uint32_t));
                points.push_back(p);
            }
            return points;
        }

        std::optional<uint64_t> declared;
        for (const auto& raw : TextLines(bytes).lines) {
            const auto line = trim(raw);
            if (line.empty())
                continue;
            if (line[0] == '#') {
                if (auto d = declared_count(line, "Number of points:"))
                    declared = d;
                continue;
            }
            std::istringstream ss(line);
            SparsePoint p;
            p.point_id = parse_field<uint64_t>(ss, "points3D.txt");
            for (int k = 0; k < 3; ++k)
                p.position[k] = parse_field<double>(ss, "points3D.txt");
            for (int k = 0; k < 3; ++k) {
                const int c = parse_field<int>(ss, "points3D.txt");
                if (c < 0 || c > 255)
                    throw ColmapError(Kind::Malformed, "points3D.txt: color component out of range");
                p.color[static_cast<std::size_t>(k)] = static_cast<uint8_t>(c);
            }
            p.error = parse_field<double>(ss, "points3D.txt");
            points.push_back(p);
        }
        check_declared(declared, points.size(), "points3D.txt");
        return points;
    }

    std::vector<uint8_t> write_points3d(std::span<const SparsePoint> points, Format format) {
        if (format == Format::Binary) {
            Writer w;
            w.write<uint64_t>(points.size());
            for (const auto& p : points) {
                w.write<uint64_t>(p.point_id);
                for (int k = 0; k < 3; ++k)
                    w.write<double>(p.position[k]);
                for (auto c : p.color)
                    w.write<uint8_t>(c);
                w.write<double>(p.error);
                w.write<uint64_t>(0);
            }
            return std::move(w.out);
        }
        auto ss = text_stream();
        ss << "# 3D point list with one line of data per point:\n"
           << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n"
           << "# Number of points: " << points.size() << ", mean track length: 0\n";
        for (const auto& p : points) {
            ss << p.point_id << ' ' << p.position[0] << ' ' << p.position[1] << ' ' << p.position[2] << ' '
               << int{p.color[0]} << ' ' << int{p.color[1]} << ' ' << int{p.color[2]} << ' ' << p.error << '\n';
        }
        return to_bytes(ss.str());
    }

    // -----------------------------------------------------------------------------
    //  Files
    // -----------------------------------------------------------------------------
    std::vector<uint8_t> read_file(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot open " + path.string());
        return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    }

    void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
        if (path.has_parent_path())
            std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + path.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    SparseModel read_model(const std::filesystem::path& dir) {
        namespace fs = std::filesystem;
        const bool binary = fs::exists(dir / "cameras.bin");
        const Format fmt = binary ? Format::Binary : Format::Text;
        const char* ext = binary ? ".bin" : ".txt";
        if (!fs::exists(dir / (std::string("cameras") + ext)))
            throw std::runtime_error("no COLMAP model found in " + dir.string());
        SparseModel m;
        m.cameras = parse_cameras(read_file(dir / (std::string("cameras") + ext)), fmt);
        m.images = parse_images(read_file(dir / (std::string("images") + ext)), fmt);
        m.points = parse_points3d(read_file(dir / (std::string("points3D") + ext)), fmt);
        return m;
    }

    void write_model(const SparseModel& model, const std::filesystem::path& dir, Format format) {
        const char* ext = format == Format::Binary ? ".bin" : ".txt";
        write_file(dir / (std::string("cameras") + ext), write_cameras(model.cameras, format));
        write_file(dir / (std::string("images") + ext), write_images(model.images, format));
        write_file(dir / (std::string("points3D") + ext), write_points3d(model.points, format));
    }

} // namespace bootsplat::colmap
