#include "lle/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "lle/errors.hpp"

namespace lle {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    require_object(j, where);
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : keys) ok = ok || key == k;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
T get_req(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Vec vec_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw ConfigError(where + " must contain only numbers");
        v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
    }
    return v;
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

Mat mat_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a nonempty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vec row = vec_from_json(j[r], where);
        if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(where + ": ragged rows");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

json mat_to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_to_json(m.row(r).transpose()));
    return a;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

std::vector<double> kernel_from_json(const json& j, const std::string& where) {
    if (j.contains("kernel")) {
        const Vec k = vec_from_json(j.at("kernel"), where + ".kernel");
        return {k.data(), k.data() + k.size()};
    }
    return gaussian_kernel(get_req<double>(j, "sigma", where), get_req<int>(j, "radius", where));
}

}  // namespace

GaussianMixturePrior random_prior(int dim, int components, std::uint64_t seed) {
    if (dim < 1 || components < 1) throw ConfigError("random prior needs dim >= 1 and components >= 1");
    std::vector<double> weights;
    std::vector<Vec> means;
    std::vector<Mat> covs;
    double total = 0.0;
    for (int k = 0; k < components; ++k) {
        RngStream s(seed, stream_id(StreamPurpose::PriorDraw, static_cast<std::uint64_t>(k)));
        const double w = 0.5 + s.next_uniform();
        weights.push_back(w);
        total += w;
        means.push_back(0.5 * sample_standard_normal(s, static_cast<std::size_t>(dim)));
        Mat b(dim, dim);
        for (int c = 0; c < dim; ++c) b.col(c) = sample_standard_normal(s, static_cast<std::size_t>(dim));
        Mat cov = 0.05 * b * b.transpose() / dim;
        cov.diagonal().array() += 0.01;
        covs.push_back(0.5 * (cov + cov.transpose()));
    }
    for (double& w : weights) w /= total;
    // Renormalize so the weights sum to 1 to the last bit available.
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) sum += weights[k];
    weights.back() = 1.0 - sum;
    return GaussianMixturePrior(std::move(weights), std::move(means), std::move(covs));
}

json prior_to_json(const GaussianMixturePrior& prior) {
    json j;
    j["weights"] = prior.weights();
    json means = json::array();
    json covs = json::array();
    for (int k = 0; k < prior.components(); ++k) {
        means.push_back(vec_to_json(prior.means()[static_cast<std::size_t>(k)]));
        covs.push_back(mat_to_json(prior.covariances()[static_cast<std::size_t>(k)]));
    }
    j["means"] = means;
    j["covariances"] = covs;
    return j;
}

GaussianMixturePrior prior_from_json(const json& j) {
    allow_keys(j, "prior", {"weights", "means", "covariances"});
    const Vec w = vec_from_json(get_req<json>(j, "weights", "prior"), "prior.weights");
    const json jm = get_req<json>(j, "means", "prior");
    const json& jc = get_req<json>(j, "covariances", "prior");
    if (!jm.is_array() || !jc.is_array() || jm.size() != static_cast<std::size_t>(w.size()) ||
        jc.size() != jm.size())
        throw ConfigError("prior: weights, means and covariances must have one entry per component");
    std::vector<Vec> means;
    std::vector<Mat> covs;
    for (std::size_t k = 0; k < jm.size(); ++k) {
        means.push_back(vec_from_json(jm[k], "prior.means"));
        covs.push_back(mat_from_json(jc[k], "prior.covariances"));
    }
    try {
        return GaussianMixturePrior({w.data(), w.data() + w.size()}, std::move(means), std::move(covs));
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("prior: ") + e.what());
    }
}

void save_prior(const std::filesystem::path& path, const GaussianMixturePrior& prior) {
    write_text(path, prior_to_json(prior).dump(1) + "\n");
}

GaussianMixturePrior load_prior(const std::filesystem::path& path) {
    return prior_from_json(read_json(path));
}

ForwardModel operator_from_json(const json& j, int dim) {
    require_object(j, "operator");
    const std::string kind = get_req<std::string>(j, "kind", "operator");
    const std::string where = "operator(" + kind + ")";
    if (kind == "identity") {
        allow_keys(j, where, {"kind"});
        std::vector<int> keep(static_cast<std::size_t>(dim));
        for (int k = 0; k < dim; ++k) keep[static_cast<std::size_t>(k)] = k;
        return ForwardModel(build_operator(dim, MaskSpec{keep}));
    }
    if (kind == "mask") {
        allow_keys(j, where, {"kind", "keep", "keep_ratio", "seed"});
        if (j.contains("keep"))
            return ForwardModel(build_operator(dim, MaskSpec{get_req<std::vector<int>>(j, "keep", where)}));
        const auto keep = random_keep_indices(dim, get_req<double>(j, "keep_ratio", where),
                                              get_or<std::uint64_t>(j, "seed", 0, where));
        return ForwardModel(build_operator(dim, MaskSpec{keep}));
    }
    if (kind == "avgpool") {
        allow_keys(j, where, {"kind", "factor"});
        return ForwardModel(build_operator(dim, AvgPoolSpec{get_req<int>(j, "factor", where)}));
    }
    if (kind == "blur") {
        allow_keys(j, where, {"kind", "kernel", "sigma", "radius"});
        return ForwardModel(build_operator(dim, BlurSpec{kernel_from_json(j, where)}));
    }
    if (kind == "hadamard") {
        allow_keys(j, where, {"kind", "keep_ratio", "seed"});
        return ForwardModel(build_operator(
            dim, HadamardSpec{get_req<double>(j, "keep_ratio", where),
                              get_or<std::uint64_t>(j, "seed", 0, where)}));
    }
    if (kind == "dense") {
        allow_keys(j, where, {"kind", "matrix", "rows", "seed"});
        if (j.contains("matrix"))
            return ForwardModel(build_operator(dim, DenseSpec{mat_from_json(j.at("matrix"), where + ".matrix")}));
        const int rows = get_req<int>(j, "rows", where);
        if (rows < 1) throw ConfigError(where + ": rows must be >= 1");
        RngStream s(get_or<std::uint64_t>(j, "seed", 0, where), stream_id(StreamPurpose::OperatorLayout, 0));
        Mat a(rows, dim);
        for (int r = 0; r < rows; ++r)
            a.row(r) = sample_standard_normal(s, static_cast<std::size_t>(dim)).transpose() / std::sqrt(dim);
        return ForwardModel(build_operator(dim, DenseSpec{a}));
    }
    if (kind == "nonlinear_blur") {
        allow_keys(j, where, {"kind", "kernel", "sigma", "radius", "scale"});
        return ForwardModel(NonlinearOperator(kernel_from_json(j, where),
                                              get_or<double>(j, "scale", 1.0, where), dim));
    }
    throw ConfigError("unknown operator kind '" + kind + "'");
}

AlgoParams algo_params_from_json(const json& j) {
    allow_keys(j, "algorithm",
               {"name", "eta", "eta_b", "zeta", "xi", "lambda", "gamma", "daps", "inner_opt",
                "exact_hc", "force_inner_optimizer"});
    AlgoParams p = AlgoParams::defaults(parse_algorithm(get_req<std::string>(j, "name", "algorithm")));
    p.eta = get_or(j, "eta", p.eta, "algorithm");
    p.eta_b = get_or(j, "eta_b", p.eta_b, "algorithm");
    p.zeta = get_or(j, "zeta", p.zeta, "algorithm");
    p.xi = get_or(j, "xi", p.xi, "algorithm");
    p.lambda = get_or(j, "lambda", p.lambda, "algorithm");
    p.gamma_rs = get_or(j, "gamma", p.gamma_rs, "algorithm");
    p.exact_hc = get_or(j, "exact_hc", p.exact_hc, "algorithm");
    p.force_inner_optimizer = get_or(j, "force_inner_optimizer", p.force_inner_optimizer, "algorithm");
    if (j.contains("daps")) {
        const json& d = j.at("daps");
        allow_keys(d, "algorithm.daps",
                   {"k_ddim", "n_langevin", "eta0", "delta", "sigma_langevin", "noiseless_linear"});
        p.daps.k_ddim = get_or(d, "k_ddim", p.daps.k_ddim, "daps");
        p.daps.n_langevin = get_or(d, "n_langevin", p.daps.n_langevin, "daps");
        p.daps.eta0 = get_or(d, "eta0", p.daps.eta0, "daps");
        p.daps.delta = get_or(d, "delta", p.daps.delta, "daps");
        p.daps.sigma_langevin = get_or(d, "sigma_langevin", p.daps.sigma_langevin, "daps");
        p.daps.noiseless_linear = get_or(d, "noiseless_linear", p.daps.noiseless_linear, "daps");
    }
    if (j.contains("inner_opt")) {
        const json& o = j.at("inner_opt");
        allow_keys(o, "algorithm.inner_opt", {"lr", "momentum", "steps"});
        p.inner_opt.lr = get_or(o, "lr", p.inner_opt.lr, "inner_opt");
        p.inner_opt.momentum = get_or(o, "momentum", p.inner_opt.momentum, "inner_opt");
        p.inner_opt.steps = get_or(o, "steps", p.inner_opt.steps, "inner_opt");
    }
    if (!(p.eta >= 0.0 && p.eta <= 1.0)) throw ConfigError("algorithm.eta must lie in [0, 1]");
    return p;
}

TrainConfig train_config_from_json(const json& j, std::uint64_t train_seed) {
    allow_keys(j, "lle",
               {"n_refs", "ref_steps", "omega", "perceptual", "epochs", "warmup", "lr_rule",
                "init_mode", "init_noise_std", "noisy_gt", "decoupled", "closed_form",
                "optimizer", "references"});
    TrainConfig c;
    c.base_seed = train_seed;
    c.n_refs = get_or(j, "n_refs", c.n_refs, "lle");
    c.ref_steps = get_or(j, "ref_steps", c.ref_steps, "lle");
    c.perceptual = get_or(j, "perceptual", c.perceptual, "lle");
    c.omega = get_or(j, "omega", c.perceptual == "none" ? 0.0 : 0.1, "lle");
    c.epochs = get_or(j, "epochs", c.epochs, "lle");
    c.warmup = get_or(j, "warmup", c.warmup, "lle");
    c.init_noise_std = get_or(j, "init_noise_std", c.init_noise_std, "lle");
    c.noisy_gt = get_or(j, "noisy_gt", c.noisy_gt, "lle");
    c.decoupled = get_or(j, "decoupled", c.decoupled, "lle");
    c.closed_form = get_or(j, "closed_form", c.closed_form, "lle");
    const std::string lr = get_or<std::string>(j, "lr_rule", "constant", "lle");
    if (lr == "constant") c.lr_rule = LrRule::Constant;
    else if (lr == "dynamic") c.lr_rule = LrRule::Dynamic;
    else throw ConfigError("lle.lr_rule must be 'constant' or 'dynamic'");
    const std::string init = get_or<std::string>(j, "init_mode", "auto", "lle");
    if (init == "auto") c.init_mode = InitMode::Auto;
    else if (init == "adaptive") c.init_mode = InitMode::Adaptive;
    else if (init == "soft") c.init_mode = InitMode::Soft;
    else throw ConfigError("lle.init_mode must be 'auto', 'adaptive' or 'soft'");
    const std::string opt = get_or<std::string>(j, "optimizer", "schedule-free", "lle");
    if (opt == "schedule-free") c.optimizer = OptimizerKind::ScheduleFree;
    else if (opt == "adam") c.optimizer = OptimizerKind::Adam;
    else throw ConfigError("lle.optimizer must be 'schedule-free' or 'adam'");
    make_perceptual(c.perceptual);
    c.validate();
    return c;
}

json coefficients_to_json(const LLECoefficients& coeffs) {
    json j;
    j["steps"] = coeffs.steps;
    j["decoupled"] = coeffs.decoupled;
    j["timesteps"] = coeffs.timesteps;
    auto pack = [](const std::vector<Vec>& set) {
        json a = json::array();
        for (const Vec& g : set) a.push_back(vec_to_json(g));
        return a;
    };
    if (coeffs.decoupled) {
        j["gamma_par"] = pack(coeffs.gamma_par);
        j["gamma_perp"] = pack(coeffs.gamma_perp);
    } else {
        j["gamma"] = pack(coeffs.gamma);
    }
    return j;
}

LLECoefficients coefficients_from_json(const json& j) {
    allow_keys(j, "coefficients", {"steps", "decoupled", "timesteps", "gamma", "gamma_par", "gamma_perp"});
    LLECoefficients c;
    c.steps = get_req<int>(j, "steps", "coefficients");
    c.decoupled = get_or(j, "decoupled", false, "coefficients");
    c.timesteps = get_req<std::vector<int>>(j, "timesteps", "coefficients");
    auto unpack = [&](const char* key) {
        std::vector<Vec> set;
        const json& a = get_req<json>(j, key, "coefficients");
        if (!a.is_array()) throw ConfigError(std::string("coefficients.") + key + " must be an array");
        for (const json& g : a) set.push_back(vec_from_json(g, std::string("coefficients.") + key));
        return set;
    };
    if (c.decoupled) {
        c.gamma_par = unpack("gamma_par");
        c.gamma_perp = unpack("gamma_perp");
    } else {
        c.gamma = unpack("gamma");
    }
    c.validate();
    return c;
}

void save_coefficients(const std::filesystem::path& path, const LLECoefficients& coeffs) {
    write_text(path, coefficients_to_json(coeffs).dump(1) + "\n");
}

LLECoefficients load_coefficients(const std::filesystem::path& path) {
    return coefficients_from_json(read_json(path));
}

void save_loss_trace(const std::filesystem::path& path, const LLECoefficients& coeffs,
                     const std::vector<TimestepResult>& steps) {
    std::ostringstream out;
    out << "timestep,epoch,loss\n";
    char buf[64];
    for (std::size_t p = 0; p < steps.size(); ++p) {
        const int t = coeffs.timesteps.at(p);
        for (std::size_t e = 0; e < steps[p].trace.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%.17g", steps[p].trace[e]);
            out << t << ',' << e << ',' << buf << '\n';
        }
    }
    write_text(path, out.str());
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    allow_keys(j, "config",
               {"prior", "schedule", "task", "algorithm", "steps", "lle", "seeds", "n_test", "peak",
                "oracle"});
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    ExperimentConfig c;

    const json& jp = get_req<json>(j, "prior", "config");
    require_object(jp, "prior");
    if (jp.contains("file")) {
        allow_keys(jp, "prior", {"file"});
        c.prior = std::make_shared<GaussianMixturePrior>(load_prior(resolve(jp.at("file").get<std::string>())));
    } else if (jp.contains("random")) {
        allow_keys(jp, "prior", {"random"});
        const json& r = jp.at("random");
        allow_keys(r, "prior.random", {"dim", "components", "seed"});
        c.prior = std::make_shared<GaussianMixturePrior>(
            random_prior(get_req<int>(r, "dim", "prior.random"), get_req<int>(r, "components", "prior.random"),
                         get_or<std::uint64_t>(r, "seed", 0, "prior.random")));
    } else {
        c.prior = std::make_shared<GaussianMixturePrior>(prior_from_json(jp));
    }

    const json js = get_or<json>(j, "schedule", json::object(), "config");
    allow_keys(js, "schedule", {"horizon", "beta_start", "beta_end"});
    c.schedule = std::make_shared<DiffusionSchedule>(DiffusionSchedule::linear(
        get_or(js, "horizon", 1000, "schedule"), get_or(js, "beta_start", 1e-4, "schedule"),
        get_or(js, "beta_end", 0.02, "schedule")));

    const json& jt = get_req<json>(j, "task", "config");
    allow_keys(jt, "task", {"operator", "sigma_y"});
    c.op = std::make_shared<ForwardModel>(operator_from_json(get_req<json>(jt, "operator", "task"), c.prior->dim()));
    c.sigma_y = get_or(jt, "sigma_y", 0.0, "task");
    if (!(c.sigma_y >= 0.0) || !std::isfinite(c.sigma_y)) throw ConfigError("task.sigma_y must be finite and >= 0");

    c.algo = algo_params_from_json(get_req<json>(j, "algorithm", "config"));
    if (c.algo.algorithm == Algorithm::DAPS && c.sigma_y == 0.0 && c.op->is_linear())
        c.algo.daps.noiseless_linear = true;
    if (requires_linear_operator(c.algo.algorithm) && !c.op->is_linear())
        throw ConfigError(to_string(c.algo.algorithm) + " requires a linear operator (unsupported operator)");

    c.steps = get_req<int>(j, "steps", "config");
    make_time_grid(*c.schedule, c.steps);

    const json js2 = get_or<json>(j, "seeds", json::object(), "config");
    allow_keys(js2, "seeds", {"train", "test"});
    c.train_seed = get_or<std::uint64_t>(js2, "train", 0, "seeds");
    c.test_seed = get_or<std::uint64_t>(js2, "test", 1, "seeds");

    if (j.contains("lle") && !j.at("lle").is_null()) {
        const json& jl = j.at("lle");
        c.lle = train_config_from_json(jl, c.train_seed);
        if (jl.contains("references")) {
            c.references = resolve(jl.at("references").get<std::string>());
            if (!std::filesystem::exists(*c.references))
                throw ConfigError("lle.references: file '" + c.references->string() + "' does not exist");
        }
        if (c.lle->decoupled && !c.op->is_linear())
            throw ConfigError("decoupled coefficients require a linear operator");
        if (c.lle->noisy_gt && c.algo.algorithm != Algorithm::DDRM && c.algo.algorithm != Algorithm::DDNM)
            throw ConfigError("noisy ground truth is only defined for DDRM and DDNM");
    }
    c.n_test = get_or(j, "n_test", 1, "config");
    if (c.n_test < 1) throw ConfigError("n_test must be >= 1");
    c.peak = get_or(j, "peak", kDefaultPeak, "config");
    if (!(c.peak > 0.0)) throw ConfigError("peak must be > 0");
    c.oracle = get_or(j, "oracle", false, "config");
    if (c.oracle && !c.op->is_linear()) throw ConfigError("oracle metrics require a linear operator");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_json(path), path.parent_path());
}

}  // namespace lle
