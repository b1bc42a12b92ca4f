#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "vipaint/harness.hpp"

namespace vipaint {

namespace {

constexpr char kSampleMagic[8] = {'V', 'I', 'P', 'S', 'M', 'P', 'L', '\0'};
constexpr std::uint32_t kSampleVersion = 1;
constexpr std::uint32_t kDtypeF64 = 1;

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::filesystem::path& path) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw std::runtime_error("sample file '" + path.string() + "' is truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

} // namespace

void write_samples(const std::filesystem::path& path, const SampleSet& samples, std::uint64_t config_hash) {
    const std::uint64_t cols = samples.empty() ? 0 : static_cast<std::uint64_t>(samples.front().size());
    for (const Vec& x : samples) require(static_cast<std::uint64_t>(x.size()) == cols, "samples have differing dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(kSampleMagic, sizeof(kSampleMagic));
    put(out, kSampleVersion);
    put(out, kDtypeF64);
    put(out, static_cast<std::uint64_t>(samples.size()));
    put(out, cols);
    put(out, config_hash);
    for (const Vec& x : samples)
        for (double v : x) put(out, v);
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

SampleFile read_samples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kSampleMagic, sizeof(magic)) != 0)
        throw std::runtime_error("'" + path.string() + "' is not a sample file");
    if (take<std::uint32_t>(in, path) != kSampleVersion) throw std::runtime_error("unsupported sample file version");
    if (take<std::uint32_t>(in, path) != kDtypeF64) throw std::runtime_error("unsupported sample dtype");
    const auto rows = take<std::uint64_t>(in, path);
    const auto cols = take<std::uint64_t>(in, path);
    SampleFile f;
    f.config_hash = take<std::uint64_t>(in, path);
    f.samples.reserve(rows);
    for (std::uint64_t r = 0; r < rows; ++r) {
        Vec x(static_cast<Eigen::Index>(cols));
        for (std::uint64_t c = 0; c < cols; ++c) x[static_cast<Eigen::Index>(c)] = take<double>(in, path);
        f.samples.push_back(std::move(x));
    }
    return f;
}

void write_trace_csv(std::ostream& os, const std::vector<LossBreakdown>& trace) {
    os << "step,total,recon,hier_kl,diff_kl\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& t = trace[i];
        os << i << ',' << t.total << ',' << t.recon << ',' << t.hier_kl << ',' << t.diff_kl << '\n';
    }
}

void write_reddiff_trace_csv(std::ostream& os, const std::vector<RedDiffStep>& trace) {
    os << "step,t,loss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) os << i << ',' << trace[i].t << ',' << trace[i].loss << '\n';
}

} // namespace vipaint
