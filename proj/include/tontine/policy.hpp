#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tontine/types.hpp"

namespace tontine {

enum class Activation { Tanh, Relu };

// Fully connected network shape; parameters live in an external flat
// vector laid out layer by layer, row-major weights then biases.
struct NetSpec {
    int input_dim = 2;
    std::vector<int> hidden = {8, 8};
    int output_dim = 1;
    Activation act = Activation::Tanh;

    std::vector<int> layer_sizes() const;  // input, hidden..., output
    int param_count() const;
};

// Forward activations recorded for the backward pass.
struct MlpTape {
    Vec input;
    std::vector<Vec> pre;   // pre-activation per layer
    std::vector<Vec> post;  // post-activation per layer (last = raw output)
};

// Evaluates the network; records the tape when given one.
Vec mlp_forward(const NetSpec& spec, const double* theta, const Vec& input, MlpTape* tape);

// Accumulates d(objective)/d(theta) into d_theta (same layout as theta)
// given d(objective)/d(output); optionally returns d(objective)/d(input).
void mlp_backward(const NetSpec& spec, const double* theta, const MlpTape& tape,
                  const Vec& d_output, double* d_theta, Vec* d_input);

// Affine feature map used by both control networks: wealth is divided by
// wealth_scale and clipped, time is divided by time_scale. Recorded here
// so saved policies reproduce their inputs exactly.
struct FeatureScaling {
    double wealth_scale = 1.0;
    double time_scale = 1.0;
    double clip_lo = -5.0;
    double clip_hi = 10.0;
};

// The two control networks share the feature map. The withdrawal network
// has one output; the allocation network has one output per asset.
struct PolicyModel {
    NetSpec q_net;
    NetSpec p_net;
    FeatureScaling scaling;
};

PolicyModel make_policy_model(int asset_count, const std::vector<int>& hidden, Activation act,
                              double w0, int horizon_years);

// Flat trainable state: both networks plus the CVaR candidate level.
struct PolicyParams {
    Vec theta_q;
    Vec theta_p;
    double w_star = 0.0;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero,
// w_star = w_star_frac * w0. Deterministic in seed.
PolicyParams init_params(const PolicyModel& model, std::uint64_t seed, double w0,
                         double w_star_frac);

// Everything needed to differentiate the withdrawal control.
struct QTape {
    MlpTape net;
    double z = 0.0;          // raw network output
    double sig = 0.0;        // sigmoid(z)
    double range = 0.0;      // max(min(q_max, W) - q_min, 0)
    double d_range_dw = 0.0; // 1 when the range varies with wealth
    double d_feat_dw = 0.0;  // d(wealth feature)/d(wealth), 0 when clipped
};

// q = q_min + max(min(q_max, W) - q_min, 0) * sigmoid(z(W, t)). Always
// inside the admissible interval for t < horizon.
double forward_q(const PolicyModel& model, const PolicyParams& params, double wealth_pre,
                 double t_years, double q_min, double q_max, QTape* tape);

struct PTape {
    MlpTape net;
    Vec p;                   // softmax output
    double d_feat_dw = 0.0;
};

// p = softmax(logits(W, t)); strictly positive, sums to one.
Vec forward_p(const PolicyModel& model, const PolicyParams& params, double wealth_post,
              double t_years, PTape* tape);

// Gradient accumulators shaped like PolicyParams.
struct Gradients {
    Vec theta_q;
    Vec theta_p;
    double w_star = 0.0;

    void setZero(const PolicyModel& model);
};

// JSON snapshot (shape, scaling, parameters); loads reject shape
// mismatches.
void save_policy_json(const PolicyModel& model, const PolicyParams& params,
                      const std::string& path);
struct LoadedPolicy {
    PolicyModel model;
    PolicyParams params;
};
LoadedPolicy load_policy_json(const std::string& path);

}  // namespace tontine
