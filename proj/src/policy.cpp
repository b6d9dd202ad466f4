#include "tontine/policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "tontine/errors.hpp"
#include "tontine/io.hpp"
#include "tontine/rng.hpp"

namespace tontine {

std::vector<int> NetSpec::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(output_dim);
    return sizes;
}

int NetSpec::param_count() const {
    auto sizes = layer_sizes();
    int count = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        count += sizes[l + 1] * sizes[l] + sizes[l + 1];
    return count;
}

namespace {

double activate(double x, Activation act) {
    return act == Activation::Tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

// Derivative from the stored post-activation (tanh) or pre-activation (relu).
double activate_grad(double pre, double post, Activation act) {
    return act == Activation::Tanh ? 1.0 - post * post : (pre > 0.0 ? 1.0 : 0.0);
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

Vec mlp_forward(const NetSpec& spec, const double* theta, const Vec& input, MlpTape* tape) {
    if (input.size() != spec.input_dim) throw ContractError("mlp_forward: input size mismatch");
    auto sizes = spec.layer_sizes();
    const int n_layers = static_cast<int>(sizes.size()) - 1;
    if (tape) {
        tape->input = input;
        tape->pre.assign(n_layers, Vec());
        tape->post.assign(n_layers, Vec());
    }
    Vec cur = input;
    int offset = 0;
    for (int l = 0; l < n_layers; ++l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            w(theta + offset, out, in);
        Eigen::Map<const Vec> b(theta + offset + out * in, out);
        offset += out * in + out;
        Vec pre = w * cur + b;
        Vec post(out);
        if (l == n_layers - 1)
            post = pre;  // linear output layer
        else
            for (int i = 0; i < out; ++i) post(i) = activate(pre(i), spec.act);
        if (tape) {
            tape->pre[l] = pre;
            tape->post[l] = post;
        }
        cur = std::move(post);
    }
    return cur;
}

void mlp_backward(const NetSpec& spec, const double* theta, const MlpTape& tape,
                  const Vec& d_output, double* d_theta, Vec* d_input) {
    auto sizes = spec.layer_sizes();
    const int n_layers = static_cast<int>(sizes.size()) - 1;
    std::vector<int> offsets(n_layers);
    int offset = 0;
    for (int l = 0; l < n_layers; ++l) {
        offsets[l] = offset;
        offset += sizes[l + 1] * sizes[l] + sizes[l + 1];
    }
    Vec d_post = d_output;
    for (int l = n_layers - 1; l >= 0; --l) {
        const int in = sizes[l];
        const int out = sizes[l + 1];
        Vec d_pre(out);
        if (l == n_layers - 1)
            d_pre = d_post;
        else
            for (int i = 0; i < out; ++i)
                d_pre(i) = d_post(i) * activate_grad(tape.pre[l](i), tape.post[l](i), spec.act);
        const Vec& prev = l == 0 ? tape.input : tape.post[l - 1];
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dw(
            d_theta + offsets[l], out, in);
        Eigen::Map<Vec> db(d_theta + offsets[l] + out * in, out);
        dw.noalias() += d_pre * prev.transpose();
        db += d_pre;
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            w(theta + offsets[l], out, in);
        d_post = w.transpose() * d_pre;
    }
    if (d_input) *d_input = d_post;
}

PolicyModel make_policy_model(int asset_count, const std::vector<int>& hidden, Activation act,
                              double w0, int horizon_years) {
    if (asset_count < 1) throw ContractError("make_policy_model: need at least one asset");
    if (!(w0 > 0.0)) throw ContractError("make_policy_model: w0 must be positive");
    PolicyModel model;
    model.q_net = NetSpec{2, hidden, 1, act};
    model.p_net = NetSpec{2, hidden, asset_count, act};
    model.scaling.wealth_scale = w0;
    model.scaling.time_scale = static_cast<double>(horizon_years);
    return model;
}

PolicyParams init_params(const PolicyModel& model, std::uint64_t seed, double w0,
                         double w_star_frac) {
    PolicyParams params;
    params.theta_q = Vec::Zero(model.q_net.param_count());
    params.theta_p = Vec::Zero(model.p_net.param_count());
    params.w_star = w_star_frac * w0;

    auto rng = path_stream(seed, 0);
    auto fill = [&rng](const NetSpec& spec, Vec& theta) {
        auto sizes = spec.layer_sizes();
        int offset = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int in = sizes[l];
            const int out = sizes[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            std::uniform_real_distribution<double> unif(-bound, bound);
            for (int i = 0; i < out * in; ++i) theta(offset + i) = unif(rng);
            offset += out * in + out;  // biases stay zero
        }
    };
    fill(model.q_net, params.theta_q);
    fill(model.p_net, params.theta_p);
    return params;
}

namespace {

Vec features(const FeatureScaling& s, double wealth, double t_years, double* d_feat_dw) {
    double w = wealth / s.wealth_scale;
    bool clipped = false;
    if (w < s.clip_lo) {
        w = s.clip_lo;
        clipped = true;
    } else if (w > s.clip_hi) {
        w = s.clip_hi;
        clipped = true;
    }
    if (d_feat_dw) *d_feat_dw = clipped ? 0.0 : 1.0 / s.wealth_scale;
    Vec f(2);
    f << w, t_years / s.time_scale;
    return f;
}

}  // namespace

double forward_q(const PolicyModel& model, const PolicyParams& params, double wealth_pre,
                 double t_years, double q_min, double q_max, QTape* tape) {
    if (!(q_max >= q_min && q_min >= 0.0))
        throw ContractError("forward_q: need 0 <= q_min <= q_max");
    QTape local;
    QTape& t = tape ? *tape : local;
    Vec f = features(model.scaling, wealth_pre, t_years, &t.d_feat_dw);
    Vec z = mlp_forward(model.q_net, params.theta_q.data(), f, tape ? &t.net : nullptr);
    t.z = z(0);
    t.sig = sigmoid(t.z);
    const double inner = std::min(q_max, wealth_pre) - q_min;
    t.range = inner > 0.0 ? inner : 0.0;
    t.d_range_dw = (inner > 0.0 && wealth_pre < q_max) ? 1.0 : 0.0;
    return q_min + t.range * t.sig;
}

Vec forward_p(const PolicyModel& model, const PolicyParams& params, double wealth_post,
              double t_years, PTape* tape) {
    PTape local;
    PTape& t = tape ? *tape : local;
    Vec f = features(model.scaling, wealth_post, t_years, &t.d_feat_dw);
    Vec z = mlp_forward(model.p_net, params.theta_p.data(), f, tape ? &t.net : nullptr);
    double zmax = z.maxCoeff();
    Vec p = (z.array() - zmax).exp();
    p /= p.sum();
    t.p = p;
    return p;
}

void Gradients::setZero(const PolicyModel& model) {
    theta_q = Vec::Zero(model.q_net.param_count());
    theta_p = Vec::Zero(model.p_net.param_count());
    w_star = 0.0;
}

namespace {

std::string act_name(Activation act) { return act == Activation::Tanh ? "tanh" : "relu"; }

Activation act_from(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw ValidationError("policy: unknown activation '" + name + "'");
}

nlohmann::json net_to_json(const NetSpec& spec) {
    return {{"input_dim", spec.input_dim},
            {"hidden", spec.hidden},
            {"output_dim", spec.output_dim},
            {"activation", act_name(spec.act)}};
}

NetSpec net_from_json(const nlohmann::json& j) {
    NetSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden = j.at("hidden").get<std::vector<int>>();
    spec.output_dim = j.at("output_dim").get<int>();
    spec.act = act_from(j.at("activation").get<std::string>());
    return spec;
}

}  // namespace

void save_policy_json(const PolicyModel& model, const PolicyParams& params,
                      const std::string& path) {
    nlohmann::json j;
    j["format"] = "policy-v1";
    j["q_net"] = net_to_json(model.q_net);
    j["p_net"] = net_to_json(model.p_net);
    j["scaling"] = {{"wealth_scale", model.scaling.wealth_scale},
                    {"time_scale", model.scaling.time_scale},
                    {"clip_lo", model.scaling.clip_lo},
                    {"clip_hi", model.scaling.clip_hi}};
    j["theta_q"] = std::vector<double>(params.theta_q.data(),
                                       params.theta_q.data() + params.theta_q.size());
    j["theta_p"] = std::vector<double>(params.theta_p.data(),
                                       params.theta_p.data() + params.theta_p.size());
    j["w_star"] = params.w_star;
    write_file(path, j.dump(2) + "\n");
}

LoadedPolicy load_policy_json(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("policy: invalid JSON in " + path + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "policy-v1")
            throw ValidationError("policy: unsupported format in " + path);
        LoadedPolicy loaded;
        loaded.model.q_net = net_from_json(j.at("q_net"));
        loaded.model.p_net = net_from_json(j.at("p_net"));
        const auto& s = j.at("scaling");
        loaded.model.scaling.wealth_scale = s.at("wealth_scale").get<double>();
        loaded.model.scaling.time_scale = s.at("time_scale").get<double>();
        loaded.model.scaling.clip_lo = s.at("clip_lo").get<double>();
        loaded.model.scaling.clip_hi = s.at("clip_hi").get<double>();
        auto tq = j.at("theta_q").get<std::vector<double>>();
        auto tp = j.at("theta_p").get<std::vector<double>>();
        if (static_cast<int>(tq.size()) != loaded.model.q_net.param_count() ||
            static_cast<int>(tp.size()) != loaded.model.p_net.param_count())
            throw ValidationError("policy: parameter count does not match the declared shape in " +
                                  path);
        loaded.params.theta_q = Eigen::Map<const Vec>(tq.data(), static_cast<Eigen::Index>(tq.size()));
        loaded.params.theta_p = Eigen::Map<const Vec>(tp.data(), static_cast<Eigen::Index>(tp.size()));
        loaded.params.w_star = j.at("w_star").get<double>();
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("policy: missing or mistyped field in " + path + ": " + e.what());
    }
}

}  // namespace tontine
