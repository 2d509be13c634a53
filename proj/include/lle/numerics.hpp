#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Stream ids are (purpose << 32) | index so that every consumer of randomness
// gets its own splittable stream.
enum class StreamPurpose : std::uint64_t {
    Reference = 1,
    ObservationNoise = 2,
    Trajectory = 3,
    CoefficientInit = 4,
    OperatorLayout = 5,
    PriorDraw = 6,
    TestTruth = 7,
};

constexpr std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
    return (static_cast<std::uint64_t>(purpose) << 32) | (index & 0xffffffffULL);
}

// Counter-based generator: SplitMix64 evaluated at (key + counter * gamma),
// where key is derived from (base_seed, stream_id). Two streams with equal
// (base_seed, stream_id) produce the same sequence; there is no shared state.
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t base_seed, std::uint64_t stream_id);

    std::uint64_t base_seed() const noexcept { return base_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64();
    // Uniform on (0, 1].
    double next_uniform();
    // Uniform on [0, bound).
    std::uint64_t next_below(std::uint64_t bound);

private:
    std::uint64_t base_seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// n i.i.d. N(0,1) deviates via Box-Muller. Consumes 2*ceil(n/2) counter values.
Vec sample_standard_normal(RngStream& stream, std::size_t n);

struct ArrayData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Mat to_matrix() const;
    static ArrayData from_matrix(const Mat& m);
};

// File layout: "LLEF64\n", "<rows> <cols>\n", then rows*cols little-endian float64.
void save_array(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                std::span<const double> data);
ArrayData load_array(const std::filesystem::path& path);

inline void save_array(const std::filesystem::path& path, const Mat& m) {
    auto a = ArrayData::from_matrix(m);
    save_array(path, a.rows, a.cols, a.data);
}

struct MetricReport {
    double mse = 0.0;
    double psnr_db = 0.0;
    std::optional<double> oracle_mse;
};

constexpr double kDefaultPeak = 2.0;

double mse(const Vec& x, const Vec& ref);
// 10*log10(peak^2 * n / sum (x_i - ref_i)^2); +inf when x == ref.
double psnr(const Vec& x, const Vec& ref, double peak = kDefaultPeak);
double psnr_from_mse(double mse, double peak = kDefaultPeak);

}  // namespace lle
