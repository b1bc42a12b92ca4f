#include "vipaint/mlp.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "vipaint/adam.hpp"
#include "vipaint/random.hpp"

namespace vipaint {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'P', 'M', 'L', 'P', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s + x * s * (1.0 - s);
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DomainError("cannot open '" + path + "' for writing");
    }
    void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void finish() {
        out_.flush();
        if (!out_) throw DomainError("write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw DomainError("cannot open '" + path + "'");
    }
    void bytes(char* p, std::size_t n) {
        in_.read(p, static_cast<std::streamsize>(n));
        check();
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(get())) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(get())) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }

private:
    char get() {
        const int c = in_.get();
        if (c == EOF) throw DomainError("truncated weights file");
        return static_cast<char>(c);
    }
    void check() {
        if (!in_) throw DomainError("truncated weights file");
    }
    std::ifstream in_;
};

} // namespace

struct MlpDenoiser::Cache {
    std::vector<Mat> pre;   // pre-activations of hidden layers
    std::vector<Mat> act;   // act[0] = input, act[l+1] = silu(pre[l])
};

MlpDenoiser::MlpDenoiser(std::size_t dim, NoiseSchedule schedule, MlpArchitecture arch, std::uint64_t seed)
    : Denoiser(schedule), dim_(dim), arch_(std::move(arch)), seed_(seed) {
    require(dim > 0, "MLP dimension must be positive");
    require(!arch_.hidden.empty(), "MLP needs at least one hidden layer");
    require(arch_.sigma_data > 0.0, "sigma_data must be positive");
    const std::vector<std::size_t> w = widths();
    Rng rng(seed, "mlp-init");
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(w[l]);
        const auto out = static_cast<Eigen::Index>(w[l + 1]);
        const bool last = l + 2 == w.size();
        const double scale = (last ? 0.1 : 1.0) / std::sqrt(static_cast<double>(in));
        Layer layer{Mat(out, in), Vec::Zero(out)};
        for (Eigen::Index i = 0; i < out; ++i)
            for (Eigen::Index j = 0; j < in; ++j) layer.weight(i, j) = scale * rng.normal();
        layers_.push_back(std::move(layer));
    }
}

std::vector<std::size_t> MlpDenoiser::widths() const {
    std::vector<std::size_t> w{dim_ + arch_.time_features};
    w.insert(w.end(), arch_.hidden.begin(), arch_.hidden.end());
    w.push_back(dim_);
    return w;
}

bool MlpDenoiser::parameters_finite() const {
    for (const Layer& l : layers_)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

double MlpDenoiser::input_scale(double t) const {
    const auto [a, s] = schedule_.alpha_sigma(t);
    return 1.0 / std::sqrt(a * a * arch_.sigma_data * arch_.sigma_data + s * s);
}

Mat MlpDenoiser::features(const Mat& z, const Vec& t) const {
    const auto n = z.cols();
    const auto d = static_cast<Eigen::Index>(dim_);
    const auto nf = static_cast<Eigen::Index>(arch_.time_features);
    Mat in(d + nf, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        in.col(j).head(d) = input_scale(t[j]) * z.col(j);
        const double ls = std::log(schedule_.sigma(t[j]));
        for (Eigen::Index f = 0; f < nf; ++f) {
            const double freq = 0.25 * std::ldexp(1.0, static_cast<int>(f / 2));
            in(d + f, j) = (f % 2 == 0) ? std::sin(freq * ls) : std::cos(freq * ls);
        }
    }
    return in;
}

Mat MlpDenoiser::run(const Mat& input, Cache* cache) const {
    Mat a = input;
    if (cache) cache->act.push_back(a);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Mat pre = layers_[l].weight * a;
        pre.colwise() += layers_[l].bias;
        if (l + 1 == layers_.size()) return pre;
        a = pre.unaryExpr(&silu);
        if (cache) {
            cache->pre.push_back(std::move(pre));
            cache->act.push_back(a);
        }
    }
    return a;
}

Mat MlpDenoiser::forward(const Mat& z, const Vec& t) const {
    require(static_cast<std::size_t>(z.rows()) == dim_ && z.cols() == t.size(), "MLP batch has the wrong shape");
    return run(features(z, t), nullptr);
}

Vec MlpDenoiser::eps_hat(const Vec& z, double t) const {
    require(static_cast<std::size_t>(z.size()) == dim_, "denoiser input has the wrong dimension");
    return forward(z, Vec::Constant(1, t)).col(0);
}

namespace {

// Backpropagates output cotangents through hidden layers; returns the input cotangent and
// optionally accumulates parameter gradients.
Mat backprop(const std::vector<MlpDenoiser::Layer>& layers, const std::vector<Mat>& pre, const std::vector<Mat>& act,
             Mat delta, std::vector<MlpDenoiser::Layer>* grads) {
    for (std::size_t l = layers.size(); l-- > 0;) {
        if (grads) {
            (*grads)[l].weight = delta * act[l].transpose();
            (*grads)[l].bias = delta.rowwise().sum();
        }
        delta = layers[l].weight.transpose() * delta;
        if (l > 0) delta = delta.cwiseProduct(pre[l - 1].unaryExpr(&silu_grad));
    }
    return delta;
}

} // namespace

Vec MlpDenoiser::vjp(const Vec& z, double t, const Vec& cotangent) const {
    require(static_cast<std::size_t>(z.size()) == dim_ && cotangent.size() == z.size(), "vjp shape mismatch");
    Cache cache;
    run(features(z, Vec::Constant(1, t)), &cache);
    const Mat din = backprop(layers_, cache.pre, cache.act, cotangent, nullptr);
    return input_scale(t) * din.col(0).head(static_cast<Eigen::Index>(dim_));
}

void MlpDenoiser::save(const std::string& path) const {
    Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kFormatVersion);
    w.u32(schedule_.kind() == ScheduleKind::VE ? 0u : 1u);
    w.f64(schedule_.sigma_min());
    w.f64(schedule_.sigma_max());
    w.f64(schedule_.t_max());
    w.u64(seed_);
    w.u64(dim_);
    w.u64(arch_.time_features);
    w.f64(arch_.sigma_data);
    w.u64(arch_.hidden.size());
    for (std::size_t h : arch_.hidden) w.u64(h);
    for (const Layer& l : layers_) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) w.f64(l.weight(i, j));
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f64(l.bias[i]);
    }
    w.finish();
}

MlpDenoiser MlpDenoiser::load(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (!std::equal(magic, magic + 8, kMagic)) throw DomainError("'" + path + "' is not an MLP weights file");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) throw DomainError("unsupported MLP weights version " + std::to_string(version));
    const std::uint32_t kind = r.u32();
    const double lo = r.f64();
    const double hi = r.f64();
    const double t_max = r.f64();
    if (kind > 1) throw DomainError("bad schedule kind in weights file");
    const NoiseSchedule sched = NoiseSchedule::from_bounds(kind == 0 ? ScheduleKind::VE : ScheduleKind::VP, lo, hi, t_max);
    const std::uint64_t seed = r.u64();
    const std::uint64_t dim = r.u64();
    MlpArchitecture arch;
    arch.time_features = r.u64();
    arch.sigma_data = r.f64();
    const std::uint64_t nh = r.u64();
    if (nh == 0 || nh > 64) throw DomainError("bad layer count in weights file");
    arch.hidden.resize(nh);
    for (auto& h : arch.hidden) h = r.u64();
    MlpDenoiser net(dim, sched, arch, seed);
    for (Layer& l : net.layers_) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = r.f64();
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = r.f64();
    }
    return net;
}

bool operator==(const MlpDenoiser& a, const MlpDenoiser& b) {
    if (a.dim_ != b.dim_ || a.widths() != b.widths() || a.seed_ != b.seed_) return false;
    if (a.arch_.sigma_data != b.arch_.sigma_data) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
        if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
    }
    return true;
}

struct MlpTrainer {
    static MlpTrainResult train(MlpDenoiser model, const SampleSet& data, const MlpTrainConfig& cfg) {
        require(!data.empty(), "training set is empty");
        require(cfg.batch > 0 && cfg.time_grid > 0, "batch and time grid must be positive");
        const auto d = static_cast<Eigen::Index>(model.dim());
        for (const Vec& x : data) require(x.size() == d, "training sample has the wrong dimension");

        std::vector<AdamState> w_state, b_state;
        for (const auto& l : model.layers_) {
            w_state.emplace_back(l.weight.size());
            b_state.emplace_back(l.bias.size());
        }
        const double t_max = model.schedule_.t_max();
        const auto bsz = static_cast<Eigen::Index>(cfg.batch);
        Rng rng(cfg.seed, "mlp-train");
        MlpTrainResult result{model, {}};
        result.loss_trace.reserve(cfg.steps);
        MlpDenoiser& net = result.model;
        std::vector<MlpDenoiser::Layer> grads(net.layers_.size());

        for (std::size_t step = 0; step < cfg.steps; ++step) {
            Mat z(d, bsz), eps(d, bsz);
            Vec t(bsz);
            for (Eigen::Index j = 0; j < bsz; ++j) {
                const Vec& x = data[rng.index(data.size())];
                t[j] = t_max * static_cast<double>(rng.index(cfg.time_grid) + 1) / static_cast<double>(cfg.time_grid);
                const auto [a, s] = net.schedule_.alpha_sigma(t[j]);
                eps.col(j) = rng.normal_vec(d);
                z.col(j) = a * x + s * eps.col(j);
            }
            MlpDenoiser::Cache cache;
            const Mat out = net.run(net.features(z, t), &cache);
            const Mat resid = out - eps;
            const double loss = resid.squaredNorm() / static_cast<double>(bsz);
            if (!std::isfinite(loss))
                throw NumericalError("MLP training diverged at step " + std::to_string(step) + " (loss not finite)");
            result.loss_trace.push_back(loss);
            backprop(net.layers_, cache.pre, cache.act, (2.0 / static_cast<double>(bsz)) * resid, &grads);
            for (std::size_t l = 0; l < net.layers_.size(); ++l) {
                w_state[l].step(net.layers_[l].weight, grads[l].weight.reshaped(), cfg.lr);
                b_state[l].step(net.layers_[l].bias, grads[l].bias, cfg.lr);
            }
            if (!net.parameters_finite())
                throw NumericalError("MLP training produced non-finite parameters at step " + std::to_string(step));
        }
        return result;
    }
};

double denoising_loss(const Denoiser& denoiser, const SampleSet& data, std::size_t n, std::uint64_t seed,
                      std::size_t time_grid) {
    require(!data.empty() && n > 0 && time_grid > 0, "denoising_loss needs data, draws and a time grid");
    const NoiseSchedule& sched = denoiser.schedule();
    Rng rng(seed, "denoising-loss");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec& x = data[rng.index(data.size())];
        const double t = sched.t_max() * static_cast<double>(rng.index(time_grid) + 1) / static_cast<double>(time_grid);
        const auto [a, s] = sched.alpha_sigma(t);
        const Vec eps = rng.normal_vec(x.size());
        total += (eps - denoiser.eps_hat(a * x + s * eps, t)).squaredNorm();
    }
    return total / static_cast<double>(n);
}

MlpTrainResult train_mlp(MlpDenoiser model, const SampleSet& data, const MlpTrainConfig& config) {
    return MlpTrainer::train(std::move(model), data, config);
}

} // namespace vipaint
