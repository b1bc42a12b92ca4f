#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vipaint/harness.hpp"

namespace vipaint {

namespace {

using json = nlohmann::json;

struct Source {
    const std::string& text;
    std::filesystem::path base_dir;
};

// 1-based line of the first occurrence of "key" in the source, or 0 when not found.
std::size_t line_of_key(const std::string& text, const std::string& key) {
    if (key.empty()) return 0;
    const auto pos = text.find('"' + key + '"');
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

/// A JSON value together with its dotted path, for field-level diagnostics.
class Node {
public:
    Node(const json& value, std::string path, std::string key, const Source& src)
        : value_(value), path_(std::move(path)), key_(std::move(key)), src_(src) {}

    [[noreturn]] void error(const std::string& msg) const {
        std::ostringstream os;
        os << "config error";
        if (const auto line = line_of_key(src_.text, key_); line > 0) os << " (line " << line << ")";
        os << " at '" << (path_.empty() ? "<root>" : path_) << "': " << msg;
        throw ConfigError(os.str());
    }

    bool has(const std::string& key) const { return value_.is_object() && value_.contains(key); }

    Node at(const std::string& key) const {
        if (!value_.is_object()) error("expected an object");
        if (!value_.contains(key)) child_path_error(key, "missing required field");
        return child(key);
    }

    std::optional<Node> get(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return child(key);
    }

    Node index(std::size_t i) const {
        return Node(value_.at(i), path_ + "[" + std::to_string(i) + "]", key_, src_);
    }

    std::size_t size() const {
        if (!value_.is_array()) error("expected an array");
        return value_.size();
    }

    void allow(std::initializer_list<const char*> keys) const {
        if (!value_.is_object()) error("expected an object");
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : value_.items()) {
            if (!ok.count(k)) child_path_error(k, "unknown field");
        }
    }

    double number() const {
        if (!value_.is_number()) error("expected a number");
        const double v = value_.get<double>();
        if (!std::isfinite(v)) error("expected a finite number");
        return v;
    }

    double positive() const {
        const double v = number();
        if (!(v > 0.0)) error("expected a positive number");
        return v;
    }

    std::uint64_t count() const {
        if (!value_.is_number_integer() || value_.get<long long>() < 0) error("expected a nonnegative integer");
        return value_.get<std::uint64_t>();
    }

    std::string str() const {
        if (!value_.is_string()) error("expected a string");
        return value_.get<std::string>();
    }

    bool boolean() const {
        if (!value_.is_boolean()) error("expected true or false");
        return value_.get<bool>();
    }

    Vec vec() const {
        Vec v(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) v[static_cast<Eigen::Index>(i)] = index(i).number();
        return v;
    }

    std::vector<double> numbers() const {
        std::vector<double> v;
        for (std::size_t i = 0; i < size(); ++i) v.push_back(index(i).number());
        return v;
    }

    template <typename F>
    auto parse(F&& f) const -> decltype(f(std::string{})) {
        try {
            return f(str());
        } catch (const DomainError& e) {
            error(e.what());
        }
    }

    const json& raw() const { return value_; }
    const Source& source() const { return src_; }

private:
    Node child(const std::string& key) const {
        return Node(value_.at(key), path_.empty() ? key : path_ + "." + key, key, src_);
    }

    [[noreturn]] void child_path_error(const std::string& key, const std::string& msg) const {
        Node(value_, path_.empty() ? key : path_ + "." + key, has(key) ? key : key_, src_).error(msg);
    }

    const json& value_;
    std::string path_;
    std::string key_;
    const Source& src_;
};

std::filesystem::path resolve(const Source& src, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || src.base_dir.empty() ? path : src.base_dir / path;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return hash_hex(fnv1a64(os.str()));
}

ScheduleSpec parse_schedule(const Node& n) {
    n.allow({"kind", "sigma_min", "sigma_max", "var_min", "var_max", "t_max"});
    ScheduleSpec s;
    s.kind = n.at("kind").parse(schedule_kind_from_string);
    if (s.kind == ScheduleKind::VE) {
        s.lo = n.has("sigma_min") ? n.at("sigma_min").positive() : 0.002;
        s.hi = n.has("sigma_max") ? n.at("sigma_max").positive() : 50.0;
    } else {
        s.lo = n.has("var_min") ? n.at("var_min").positive() : 1e-4;
        s.hi = n.has("var_max") ? n.at("var_max").positive() : 0.999;
    }
    s.t_max = n.has("t_max") ? n.at("t_max").positive() : 0.0;
    try {
        (void)s.build();
    } catch (const DomainError& e) {
        n.error(e.what());
    }
    return s;
}

GmmPrior parse_gmm(const Node& n) {
    GmmPrior g;
    g.weights = n.at("weights").numbers();
    const Node means = n.at("means");
    const Node vars = n.at("variances");
    for (std::size_t k = 0; k < means.size(); ++k) g.means.push_back(means.index(k).vec());
    for (std::size_t k = 0; k < vars.size(); ++k) g.covs.push_back(vars.index(k).vec());
    try {
        g.validate();
    } catch (const DomainError& e) {
        n.error(e.what());
    }
    return g;
}

PriorSpec parse_prior(const Node& n, std::string& digest) {
    n.allow({"type", "weights", "means", "variances", "mlp"});
    PriorSpec p;
    const std::string type = n.at("type").str();
    if (type != "gmm" && type != "mlp") n.at("type").error("expected \"gmm\" or \"mlp\"");
    p.gmm = parse_gmm(n);
    if (type == "mlp") {
        const Node m = n.at("mlp");
        m.allow({"weights_path", "train_samples", "data_seed", "hidden", "time_features", "sigma_data", "steps", "lr",
                 "batch", "train_seed", "time_grid"});
        MlpPriorSpec s;
        s.weights_path = resolve(n.source(), m.at("weights_path").str());
        if (auto v = m.get("train_samples")) s.train_samples = v->count();
        if (auto v = m.get("data_seed")) s.data_seed = v->count();
        if (auto v = m.get("hidden")) {
            s.architecture.hidden.clear();
            for (std::size_t i = 0; i < v->size(); ++i) s.architecture.hidden.push_back(v->index(i).count());
        }
        if (auto v = m.get("time_features")) s.architecture.time_features = v->count();
        if (auto v = m.get("sigma_data")) s.architecture.sigma_data = v->positive();
        if (auto v = m.get("steps")) s.training.steps = v->count();
        if (auto v = m.get("lr")) s.training.lr = v->positive();
        if (auto v = m.get("batch")) s.training.batch = v->count();
        if (auto v = m.get("train_seed")) s.training.seed = v->count();
        if (auto v = m.get("time_grid")) s.training.time_grid = v->count();
        if (std::filesystem::exists(s.weights_path)) digest = file_digest(s.weights_path);
        p.mlp = s;
    }
    return p;
}

OperatorSpec parse_operator(const Node& n, std::size_t dim, std::vector<int>& resolved_mask) {
    n.allow({"kind", "mask", "mask_file", "shape", "kernel_size", "kernel_std", "factor", "sigma_v",
             "observation_model", "laplace_scale"});
    OperatorSpec o;
    o.kind = n.at("kind").parse(operator_kind_from_string);
    o.sigma_v = n.at("sigma_v").positive();
    if (auto v = n.get("observation_model")) o.observation_model = v->parse(observation_model_from_string);
    if (auto v = n.get("laplace_scale")) o.laplace_scale = v->positive();
    if (o.kind == OperatorKind::Mask) {
        if (n.has("mask") == n.has("mask_file")) n.error("mask operators need exactly one of 'mask' or 'mask_file'");
        if (auto v = n.get("mask")) {
            for (std::size_t i = 0; i < v->size(); ++i) {
                const auto b = v->index(i).count();
                if (b > 1) v->index(i).error("mask entries must be 0 or 1");
                o.mask.push_back(static_cast<int>(b));
            }
        } else {
            const Node f = n.at("mask_file");
            const auto path = resolve(n.source(), f.str());
            if (!std::filesystem::exists(path)) f.error("mask file '" + path.string() + "' does not exist");
            try {
                o.mask = load_mask_file(path.string());
            } catch (const std::exception& e) {
                f.error(e.what());
            }
            resolved_mask = o.mask;
        }
        if (o.mask.size() != dim) n.error("mask length " + std::to_string(o.mask.size()) + " differs from prior dimension " + std::to_string(dim));
        o.shape = {1, dim};
    } else {
        if (auto v = n.get("shape")) {
            if (v->size() != 2) v->error("expected [height, width]");
            o.shape = {v->index(0).count(), v->index(1).count()};
        } else {
            o.shape = {1, dim};
        }
        if (o.shape.size() != dim) n.error("operator shape does not match prior dimension " + std::to_string(dim));
        if (auto v = n.get("kernel_size")) o.kernel_size = v->count();
        if (auto v = n.get("kernel_std")) o.kernel_std = v->positive();
        if (auto v = n.get("factor")) o.factor = v->count();
    }
    return o;
}

MethodSpec parse_method(const Node& n, const std::string& name, const NoiseSchedule& sched) {
    MethodSpec m;
    m.name = name;
    if (name == "vipaint") {
        n.allow({"levels", "times", "beta", "mc_samples", "opt_steps", "lr", "lr_decay", "lr_decay_every",
                 "diffusion_terms", "rho", "eta", "init", "phase2", "enforce_snr_window"});
        const std::size_t k = n.has("levels") ? n.at("levels").count() : 2;
        if (k < 2) n.at("levels").error("need at least two levels");
        VipaintConfig c = VipaintConfig::defaults(sched, k);
        if (auto v = n.get("times")) {
            c.times = v->numbers();
            if (n.has("levels") && c.times.size() != k) v->error("length differs from 'levels'");
        }
        if (auto v = n.get("beta")) c.beta = v->number();
        if (auto v = n.get("mc_samples")) c.mc_samples = v->count();
        if (auto v = n.get("opt_steps")) c.opt_steps = v->count();
        if (auto v = n.get("lr")) {
            if (v->size() != 3) v->error("expected [mu, gamma, tau] learning rates");
            c.lr_mu = v->index(0).positive();
            c.lr_gamma = v->index(1).positive();
            c.lr_tau = v->index(2).positive();
        }
        if (auto v = n.get("lr_decay")) c.lr_decay = v->positive();
        if (auto v = n.get("lr_decay_every")) c.lr_decay_every = v->count();
        if (auto v = n.get("diffusion_terms")) c.diffusion_terms = v->count();
        if (auto v = n.get("rho")) c.rho = v->positive();
        if (auto v = n.get("eta")) c.eta = v->number();
        if (auto v = n.get("enforce_snr_window")) c.enforce_snr_window = v->boolean();
        if (auto v = n.get("init")) {
            v->allow({"a1", "a2", "a3", "gamma0"});
            if (auto w = v->get("a1")) c.init.a1 = w->number();
            if (auto w = v->get("a2")) c.init.a2 = w->number();
            if (auto w = v->get("a3")) c.init.a3 = w->number();
            if (auto w = v->get("gamma0")) c.init.gamma0 = w->number();
        }
        if (auto v = n.get("phase2")) {
            v->allow({"zeta", "steps", "eta", "t_min"});
            if (auto w = v->get("zeta")) c.phase2.zeta = w->number();
            if (auto w = v->get("steps")) c.phase2.steps = w->count();
            if (auto w = v->get("eta")) c.phase2.eta = w->number();
            if (auto w = v->get("t_min")) c.phase2.t_min = w->positive();
        }
        try {
            c.validate(sched);
        } catch (const DomainError& e) {
            n.error(e.what());
        }
        m.vipaint = c;
        return m;
    }
    BaselineMethod bm{};
    try {
        bm = baseline_method_from_string(name);
    } catch (const DomainError& e) {
        n.error(e.what());
    }
    n.allow({"steps", "zeta", "jump_length", "jumps", "prior_weight", "lr", "eta", "rho", "t_min"});
    BaselineConfig c = BaselineConfig::defaults(bm, sched.kind());
    if (auto v = n.get("steps")) c.steps = v->count();
    if (auto v = n.get("zeta")) c.zeta = v->number();
    if (auto v = n.get("jump_length")) c.jump_length = v->count();
    if (auto v = n.get("jumps")) c.jumps = v->count();
    if (auto v = n.get("prior_weight")) c.prior_weight = v->number();
    if (auto v = n.get("lr")) c.lr = v->positive();
    if (auto v = n.get("eta")) c.eta = v->number();
    if (auto v = n.get("rho")) c.rho = v->positive();
    if (auto v = n.get("t_min")) c.t_min = v->positive();
    try {
        c.validate();
    } catch (const DomainError& e) {
        n.error(e.what());
    }
    m.baseline = c;
    return m;
}

std::vector<std::uint64_t> parse_seeds(const Node& n) {
    if (n.raw().is_string()) {
        try {
            return parse_seed_list(n.str());
        } catch (const ConfigError& e) {
            n.error(e.what());
        }
    }
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n.size(); ++i) seeds.push_back(n.index(i).count());
    if (seeds.empty()) n.error("seed list is empty");
    return seeds;
}

} // namespace

NoiseSchedule ScheduleSpec::build() const {
    if (kind == ScheduleKind::VE) return NoiseSchedule::ve(lo, hi, t_max);
    return NoiseSchedule::vp(lo, hi, t_max > 0.0 ? t_max : 1.0);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(spec);
    std::string part;
    auto to_u64 = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("invalid seed '" + s + "' in '" + spec + "'");
        return std::stoull(s);
    };
    while (std::getline(ss, part, ',')) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(to_u64(part));
            continue;
        }
        const auto lo = to_u64(part.substr(0, dots));
        const auto hi = to_u64(part.substr(dots + 2));
        if (hi < lo) throw ConfigError("empty seed range '" + part + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
    if (out.empty()) throw ConfigError("seed list is empty");
    return out;
}

const MethodSpec& ExperimentConfig::method(const std::string& n) const {
    for (const auto& m : methods)
        if (m.name == n) return m;
    throw ConfigError("method '" + n + "' is not configured in " + (source.empty() ? std::string("config") : source.string()));
}

std::uint64_t ExperimentConfig::problem_hash() const { return fnv1a64(problem_canonical); }

std::uint64_t ExperimentConfig::run_hash(const std::string& n) const {
    for (std::size_t i = 0; i < methods.size(); ++i)
        if (methods[i].name == n) return fnv1a64(problem_canonical + "\n" + n + "\n" + method_canonical[i]);
    throw ConfigError("method '" + n + "' is not configured");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto byte = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte == 0 ? 0 : byte - 1), '\n');
        throw ConfigError("config error (line " + std::to_string(line) + "): malformed JSON: " + e.what());
    }
    const Source src{text, base_dir};
    const Node root(doc, "", "", src);
    root.allow({"schema_version", "name", "schedule", "prior", "operator", "observation", "samples", "oracle_samples",
                "seeds", "output_dir", "methods"});

    ExperimentConfig c;
    c.schema_version = static_cast<int>(root.at("schema_version").count());
    if (c.schema_version != kConfigSchemaVersion)
        root.at("schema_version").error("unsupported schema version " + std::to_string(c.schema_version) + " (expected " +
                                        std::to_string(kConfigSchemaVersion) + ")");
    if (auto v = root.get("name")) c.name = v->str();
    c.schedule = parse_schedule(root.at("schedule"));
    const NoiseSchedule sched = c.schedule.build();

    std::string weights_digest;
    c.prior = parse_prior(root.at("prior"), weights_digest);
    const std::size_t dim = c.prior.gmm.dim();
    std::vector<int> resolved_mask;
    c.op = parse_operator(root.at("operator"), dim, resolved_mask);

    MeasurementOp op = [&] {
        try {
            return build_operator(c.op, c.prior.gmm);
        } catch (const DomainError& e) {
            root.at("operator").error(e.what());
        }
    }();
    const Node obs = root.at("observation");
    obs.allow({"y", "x_true", "noise_seed"});
    if (obs.has("y") == obs.has("x_true")) obs.error("need exactly one of 'y' or 'x_true'");
    if (auto v = obs.get("y")) {
        c.y = v->vec();
        if (static_cast<std::size_t>(c.y.size()) != op.output_dim())
            v->error("length " + std::to_string(c.y.size()) + " differs from operator output size " + std::to_string(op.output_dim()));
    } else {
        const Node xt = obs.at("x_true");
        const Vec x = xt.vec();
        if (static_cast<std::size_t>(x.size()) != dim) xt.error("length differs from prior dimension");
        const std::uint64_t ns = obs.has("noise_seed") ? obs.at("noise_seed").count() : 0;
        Rng rng(ns, "observation");
        c.y = op.apply(x) + op.sigma_v() * rng.normal_vec(static_cast<Eigen::Index>(op.output_dim()));
    }

    if (auto v = root.get("samples")) c.samples = v->count();
    if (c.samples == 0) root.at("samples").error("need at least one sample");
    if (auto v = root.get("oracle_samples")) c.oracle_samples = v->count();
    if (c.oracle_samples == 0) root.at("oracle_samples").error("need at least one oracle sample");
    if (auto v = root.get("seeds")) c.seeds = parse_seeds(*v);
    if (auto v = root.get("output_dir")) c.output_dir = resolve(src, v->str());

    const Node methods = root.at("methods");
    if (!methods.raw().is_object() || methods.raw().empty()) methods.error("expected a non-empty object of methods");
    for (const auto& [name, body] : methods.raw().items()) {
        c.methods.push_back(parse_method(methods.at(name), name, sched));
        c.method_canonical.push_back(body.dump());
    }

    json problem = json::object();
    for (const char* key : {"schedule", "prior", "operator", "observation", "samples", "oracle_samples"})
        if (doc.contains(key)) problem[key] = doc[key];
    if (!resolved_mask.empty()) problem["resolved_mask"] = resolved_mask;
    if (!weights_digest.empty()) problem["weights_digest"] = weights_digest;
    c.problem_canonical = problem.dump();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    ExperimentConfig c = parse_config(os.str(), path.parent_path());
    c.source = path;
    if (c.name.empty()) c.name = path.stem().string();
    return c;
}

MeasurementOp build_operator(const OperatorSpec& spec, const GmmPrior& data) {
    MeasurementOp op = [&] {
        switch (spec.kind) {
        case OperatorKind::Mask: return MeasurementOp::mask(spec.mask, spec.sigma_v);
        case OperatorKind::GaussianBlur:
            return MeasurementOp::gaussian_blur(spec.shape, spec.kernel_size, spec.kernel_std, spec.sigma_v);
        case OperatorKind::Downsample: return MeasurementOp::downsample(spec.shape, spec.factor, spec.sigma_v);
        }
        throw DomainError("unknown operator kind");
    }();
    if (spec.observation_model == ObservationModel::Laplace) {
        const double b = spec.laplace_scale > 0.0 ? spec.laplace_scale : laplace_scale_from_samples(sample(data, 1024, 0));
        op.set_observation_model(ObservationModel::Laplace, b);
    }
    return op;
}

} // namespace vipaint
