#include "lle/numerics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "lle/errors.hpp"

namespace lle {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr char kMagic[] = "LLEF64\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
        return r;
    }
    return v;
}

}  // namespace

RngStream::RngStream(std::uint64_t base_seed, std::uint64_t stream_id)
    : base_seed_(base_seed),
      stream_id_(stream_id),
      key_(mix64(mix64(base_seed + kGamma) ^ (stream_id * 0xD1B54A32D192ED03ULL + kGamma))) {}

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double RngStream::next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
    if (bound == 0) throw BoundsError("next_below: bound must be positive");
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = 0;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % bound;
}

Vec sample_standard_normal(RngStream& stream, std::size_t n) {
    Vec out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = stream.next_uniform();
        const double u2 = stream.next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        out[static_cast<Eigen::Index>(i)] = r * std::cos(theta);
        if (i + 1 < n) out[static_cast<Eigen::Index>(i + 1)] = r * std::sin(theta);
    }
    return out;
}

Mat ArrayData::to_matrix() const {
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[r * cols + c];
    return m;
}

ArrayData ArrayData::from_matrix(const Mat& m) {
    ArrayData a;
    a.rows = static_cast<std::size_t>(m.rows());
    a.cols = static_cast<std::size_t>(m.cols());
    a.data.resize(a.rows * a.cols);
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c)
            a.data[r * a.cols + c] = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return a;
}

void save_array(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                std::span<const double> data) {
    if (data.size() != rows * cols)
        throw DimensionError("save_array: data length " + std::to_string(data.size()) +
                             " != rows*cols = " + std::to_string(rows * cols));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("save_array: cannot open " + path.string());
    out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    const std::string header = std::to_string(rows) + " " + std::to_string(cols) + "\n";
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (double v : data) {
        const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
        char buf[8];
        std::memcpy(buf, &bits, 8);
        out.write(buf, 8);
    }
    if (!out) throw Error("save_array: write failed for " + path.string());
}

ArrayData load_array(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_array: cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    for (std::size_t i = 0; i < kMagicLen; ++i) {
        if (i >= bytes.size() || bytes[i] != kMagic[i]) throw FormatError("bad magic", i);
    }
    std::size_t pos = kMagicLen;
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) throw FormatError("missing shape line terminator", bytes.size());
    const std::string shape = bytes.substr(pos, eol - pos);
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const char ch = shape[i];
        if (!(ch == ' ' || (ch >= '0' && ch <= '9'))) throw FormatError("bad shape line", pos + i);
    }
    std::istringstream ss(shape);
    ArrayData a;
    if (!(ss >> a.rows >> a.cols)) throw FormatError("unparseable shape line", pos);
    pos = eol + 1;

    const std::size_t count = a.rows * a.cols;
    const std::size_t payload = bytes.size() - pos;
    if (payload < count * 8) throw FormatError("truncated payload", bytes.size());
    if (payload > count * 8) throw FormatError("trailing bytes after payload", pos + count * 8);
    a.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes.data() + pos + 8 * i, 8);
        a.data[i] = std::bit_cast<double>(to_little_endian(bits));
    }
    return a;
}

double mse(const Vec& x, const Vec& ref) {
    if (x.size() != ref.size())
        throw DimensionError("mse: length mismatch " + std::to_string(x.size()) + " vs " +
                             std::to_string(ref.size()));
    if (x.size() == 0) return 0.0;
    return (x - ref).squaredNorm() / static_cast<double>(x.size());
}

double psnr_from_mse(double m, double peak) {
    if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double psnr(const Vec& x, const Vec& ref, double peak) {
    return psnr_from_mse(mse(x, ref), peak);
}

}  // namespace lle
