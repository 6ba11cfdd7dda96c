#include "bootsplat/gaussian.hpp"
#include "bootsplat/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <queue>

namespace bootsplat {

    Gaussian Gaussian::zero() {
        Gaussian g;
        g.rotation.setZero();
        return g;
    }

    double Gaussian::opacity() const { return sigmoid(opacity_logit); }

    Eigen::Matrix3d build_covariance(const Quat& rotation, const Eigen::Vector3d& log_scale) {
        const Eigen::Matrix3d R = quat_to_rotation(rotation);
        const Eigen::Vector3d s2 = (2.0 * log_scale).array().exp();
        Eigen::Matrix3d cov = R * s2.asDiagonal() * R.transpose();
        // Symmetrize against rounding so downstream code can rely on exact symmetry.
        return 0.5 * (cov + cov.transpose());
    }

    double evaluate_gaussian(const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov, const Eigen::Vector3d& x) {
        const Eigen::Matrix3d reg = cov + kCovarianceRegularizer * Eigen::Matrix3d::Identity();
        const Eigen::Vector3d d = x - mean;
        const Eigen::Vector3d sol = reg.ldlt().solve(d);
        return std::exp(-0.5 * d.dot(sol));
    }

    // -----------------------------------------------------------------------------
    //  k-nearest neighbours
    // -----------------------------------------------------------------------------
    namespace {

        class KdTree {
        public:
            explicit KdTree(std::span<const Eigen::Vector3d> pts)
                : pts_(pts),
                  order_(pts.size()),
                  axis_(pts.size(), 0) {
                std::iota(order_.begin(), order_.end(), 0u);
                build(0, order_.size());
            }

            // Squared distances of the k nearest points other than `self`.
            std::vector<double> knn(std::size_t self, int k) const {
                std::priority_queue<double> heap;
                search(0, order_.size(), self, static_cast<std::size_t>(k), heap);
                std::vector<double> out;
                while (!heap.empty()) {
                    out.push_back(heap.top());
                    heap.pop();
                }
                return out;
            }

        private:
            // The node for range [lo, hi) sits at its midpoint, so axis_ is indexed by it.
            void build(std::size_t lo, std::size_t hi) {
                if (hi - lo <= 1)
                    return;
                Eigen::Vector3d mn = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
                Eigen::Vector3d mx = -mn;
                for (std::size_t i = lo; i < hi; ++i) {
                    mn = mn.cwiseMin(pts_[order_[i]]);
                    mx = mx.cwiseMax(pts_[order_[i]]);
                }
                int axis = 0;
                (mx - mn).maxCoeff(&axis);
                const std::size_t mid = (lo + hi) / 2;
                std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                                 order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](uint32_t a, uint32_t b) {
                                     return pts_[a][axis] < pts_[b][axis];
                                 });
                axis_[mid] = axis;
                build(lo, mid);
                build(mid + 1, hi);
            }

            void search(std::size_t lo, std::size_t hi, std::size_t self, std::size_t k, std::priority_queue<double>& heap) const {
                if (lo >= hi)
                    return;
                const std::size_t mid = (lo + hi) / 2;
                const uint32_t idx = order_[mid];
                if (idx != self) {
                    const double d2 = (pts_[idx] - pts_[self]).squaredNorm();
                    if (heap.size() < k)
                        heap.push(d2);
                    else if (d2 < heap.top()) {
                        heap.pop();
                        heap.push(d2);
                    }
                }
                if (hi - lo == 1)
                    return;
                const int axis = axis_[mid];
                const double diff = pts_[self][axis] - pts_[idx][axis];
                const bool left_first = diff < 0.0;
                if (left_first)
                    search(lo, mid, self, k, heap);
                else
                    search(mid + 1, hi, self, k, heap);
                if (heap.size() < k || diff * diff < heap.top()) {
                    if (left_first)
                        search(mid + 1, hi, self, k, heap);
                    else
                        search(lo, mid, self, k, heap);
                }
            }

            std::span<const Eigen::Vector3d> pts_;
            std::vector<uint32_t> order_;
            std::vector<int> axis_;
        };

    } // namespace

    std::vector<double> mean_knn_distance(std::span<const Eigen::Vector3d> points, int k) {
        std::vector<double> out(points.size(), 0.0);
        if (points.size() < 2)
            return out;
        const KdTree tree(points);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto d2 = tree.knn(i, k);
            double sum = 0.0;
            for (double v : d2)
                sum += std::sqrt(v);
            out[i] = sum / static_cast<double>(d2.size());
        }
        return out;
    }

    GaussianCloud init_from_sfm(std::span<const colmap::SparsePoint> points) {
        if (points.empty())
            throw EmptySceneError("init_from_sfm: no sparse points");

        std::vector<Eigen::Vector3d> xyz;
        xyz.reserve(points.size());
        for (const auto& p : points)
            xyz.push_back(p.position);
        const auto dist = mean_knn_distance(xyz, 3);

        // A lone point has no neighbours; give it a small default footprint.
        constexpr double kLonePointScale = 0.01;
        constexpr double kMinScale = 1e-7;

        GaussianCloud cloud;
        cloud.points.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            Gaussian g;
            g.position = points[i].position;
            const double s = points.size() == 1 ? kLonePointScale : std::max(dist[i], kMinScale);
            g.log_scale = Eigen::Vector3d::Constant(std::log(s));
            g.opacity_logit = logit(kInitialOpacity);
            for (int c = 0; c < 3; ++c)
                g.color[c] = points[i].color[static_cast<std::size_t>(c)] / 255.0;
            cloud.points.push_back(g);
        }
        return cloud;
    }

    void normalize_rotations(GaussianCloud& cloud) {
        for (auto& g : cloud.points)
            g.rotation = normalize_quat(g.rotation);
    }

    // -----------------------------------------------------------------------------
    //  Checkpoints
    // -----------------------------------------------------------------------------
    namespace {
        constexpr char kMagic[4] = {'B', 'S', 'P', 'L'};
        constexpr uint32_t kVersion = 1;

        template <typename T>
        void put(std::vector<uint8_t>& out, const T& v) {
            const auto* p = reinterpret_cast<const uint8_t*>(&v);
            out.insert(out.end(), p, p + sizeof(T));
        }

        template <typename T>
        T take(std::span<const uint8_t> bytes, std::size_t& pos) {
            if (pos + sizeof(T) > bytes.size())
                throw CheckpointError("checkpoint truncated");
            T v;
            std::memcpy(&v, bytes.data() + pos, sizeof(T));
            pos += sizeof(T);
            return v;
        }
    } // namespace

    std::vector<uint8_t> serialize_cloud(const GaussianCloud& cloud, uint64_t iteration) {
        std::vector<uint8_t> out;
        out.reserve(32 + cloud.size() * kParamsPerGaussian * sizeof(double));
        out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
        put<uint32_t>(out, kVersion);
        put<uint32_t>(out, static_cast<uint32_t>(cloud.sh_degree));
        put<uint64_t>(out, iteration);
        put<uint64_t>(out, cloud.size());
        for (const auto& g : cloud.points)
            for_each_param(g, [&](ParamGroup, const double& v) { put<double>(out, v); });
        return out;
    }

    GaussianCloud deserialize_cloud(std::span<const uint8_t> bytes, uint64_t* iteration) {
        if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
            throw CheckpointError("not a checkpoint (bad magic)");
        std::size_t pos = 4;
        const auto version = take<uint32_t>(bytes, pos);
        if (version != kVersion)
            throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
        GaussianCloud cloud;
        cloud.sh_degree = static_cast<int>(take<uint32_t>(bytes, pos));
        const auto iter = take<uint64_t>(bytes, pos);
        const auto n = take<uint64_t>(bytes, pos);
        if (n > (bytes.size() - pos) / (kParamsPerGaussian * sizeof(double)))
            throw CheckpointError("checkpoint truncated");
        cloud.points.resize(n);
        for (auto& g : cloud.points)
            for_each_param(g, [&](ParamGroup, double& v) { v = take<double>(bytes, pos); });
        if (iteration)
            *iteration = iter;
        return cloud;
    }

    void save_checkpoint(const GaussianCloud& cloud, uint64_t iteration, const std::filesystem::path& path) {
        const auto bytes = serialize_cloud(cloud, iteration);
        if (path.has_parent_path())
            std::filesystem::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw CheckpointError("cannot write " + path.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    GaussianCloud load_checkpoint(const std::filesystem::path& path, uint64_t* iteration) {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw CheckpointError("cannot open " + path.string());
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return deserialize_cloud(bytes, iteration);
    }

} // namespace bootsplat
