#include "isqf/monotone_head.hpp"

#include "isqf/crps.hpp"
#include "isqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

namespace isqf {

namespace {

constexpr double kPositionFloor = 1e-6;  // per-piece share added before renormalizing
constexpr double kValueFloor = 1e-12;
constexpr double kRateFloor = 1e-6;
constexpr double kScaleFloor = 1e-6;
constexpr double kMinShape = 1e-4;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// y = W x + b with W row-major [rows, cols].
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x, std::span<double> y) {
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < y.size(); ++r) {
        double acc = b[r];
        const double* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

// Accumulates dW += dy x^T, db += dy and, if dx is non-empty, dx += W^T dy.
void affine_backward(std::span<const double> w, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> db, std::span<double> dx) {
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < dy.size(); ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        db[r] += g;
        double* drow = dw.data() + r * cols;
        const double* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) drow[c] += g * x[c];
        if (!dx.empty()) {
            for (std::size_t c = 0; c < cols; ++c) dx[c] += g * row[c];
        }
    }
}

std::size_t tail_outputs(const HeadConfig& c) { return c.tail == TailKind::Exponential ? 2 : 4; }

} // namespace

std::string to_string(HeadMode mode) { return mode == HeadMode::Iqf ? "iqf" : "isqf"; }
std::string to_string(TailKind kind) { return kind == TailKind::Exponential ? "exponential" : "gpd"; }
std::string to_string(Activation act) { return act == Activation::Softplus ? "softplus" : "relu"; }

HeadMode parse_head_mode(const std::string& text) {
    if (text == "iqf") return HeadMode::Iqf;
    if (text == "isqf") return HeadMode::Isqf;
    throw std::invalid_argument("unknown head mode '" + text + "' (expected iqf or isqf)");
}

TailKind parse_tail_kind(const std::string& text) {
    if (text == "exponential" || text == "exp") return TailKind::Exponential;
    if (text == "gpd") return TailKind::Gpd;
    throw std::invalid_argument("unknown tail kind '" + text + "' (expected exponential or gpd)");
}

Activation parse_activation(const std::string& text) {
    if (text == "softplus") return Activation::Softplus;
    if (text == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation '" + text + "' (expected softplus or relu)");
}

void HeadConfig::validate() const {
    if (input_dim == 0) throw std::invalid_argument("head input dimension must be positive");
    if (hidden == 0) throw std::invalid_argument("increment MLP width must be positive");
    if (spline_pieces == 0) throw std::invalid_argument("spline needs at least one piece per interval");
    if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
        throw std::invalid_argument("init_scale must be finite and positive");
    }
    QuantileKnots(levels, std::vector<double>(levels.size(), 0.0));
}

void to_json(nlohmann::json& j, const HeadConfig& c) {
    j = {{"input_dim", c.input_dim},
         {"levels", c.levels},
         {"mode", to_string(c.mode)},
         {"spline_pieces", c.spline_pieces},
         {"tail", to_string(c.tail)},
         {"hidden", c.hidden},
         {"activation", to_string(c.activation)},
         {"init_scale", c.init_scale}};
}

void from_json(const nlohmann::json& j, HeadConfig& c) {
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.levels = j.at("levels").get<std::vector<double>>();
    c.mode = parse_head_mode(j.at("mode").get<std::string>());
    c.spline_pieces = j.at("spline_pieces").get<std::size_t>();
    c.tail = parse_tail_kind(j.at("tail").get<std::string>());
    c.hidden = j.at("hidden").get<std::size_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.init_scale = j.at("init_scale").get<double>();
}

// ---------------------------------------------------------------------------

MonotoneHead::MonotoneHead(HeadConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::size_t H = config_.input_dim;
    const std::size_t K = config_.levels.size();
    const std::size_t S = config_.spline_pieces;
    params_.add("base.weight", {1, H});
    params_.add("base.bias", {1});
    increments_begin_ = params_.block_count();
    for (std::size_t k = 1; k < K; ++k) {
        const std::string p = "inc" + std::to_string(k) + ".";
        params_.add(p + "w1", {config_.hidden, H});
        params_.add(p + "b1", {config_.hidden});
        params_.add(p + "w2", {1, config_.hidden});
        params_.add(p + "b2", {1});
    }
    segments_begin_ = params_.block_count();
    if (config_.mode == HeadMode::Isqf) {
        if (S > 1) {
            for (std::size_t k = 0; k + 1 < K; ++k) {
                const std::string p = "seg" + std::to_string(k) + ".";
                params_.add(p + "pos.weight", {S - 1, H});
                params_.add(p + "pos.bias", {S - 1});
                params_.add(p + "val.weight", {S, H});
                params_.add(p + "val.bias", {S});
            }
        }
        tail_begin_ = params_.block_count();
        params_.add("tail.weight", {tail_outputs(config_), H});
        params_.add("tail.bias", {tail_outputs(config_)});
    } else {
        tail_begin_ = params_.block_count();
    }
}

MonotoneHead MonotoneHead::initialized(HeadConfig config, std::uint64_t seed) {
    MonotoneHead head(std::move(config));
    const auto& c = head.config_;
    const std::size_t K = c.levels.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto randomize = [&](std::span<double> xs, double sd) {
        for (auto& x : xs) x = sd * normal(rng);
    };
    auto& p = head.params_;
    const double in_sd = 1.0 / std::sqrt(static_cast<double>(c.input_dim));
    randomize(p.values(0), 0.01 * in_sd);
    p.values(1)[0] = -0.5 * c.init_scale;
    const double inc0 = c.init_scale / static_cast<double>(K);
    for (std::size_t k = 1; k < K; ++k) {
        const std::size_t b = head.increments_begin_ + 4 * (k - 1);
        randomize(p.values(b), in_sd);
        randomize(p.values(b + 2), 0.1 / std::sqrt(static_cast<double>(c.hidden)));
        p.values(b + 3)[0] = c.activation == Activation::Softplus ? inverse_softplus(inc0) : inc0;
    }
    if (c.mode == HeadMode::Isqf) {
        auto bias = p.values(head.tail_begin_ + 1);
        if (c.tail == TailKind::Exponential) {
            bias[0] = bias[1] = inverse_softplus(1.0 - kRateFloor);
        } else {
            const double shape = 0.1;
            const double frac = (shape - kMinShape) / (kMaxGpdShape - kMinShape);
            bias[0] = bias[2] = std::log(frac / (1.0 - frac));
            bias[1] = bias[3] = inverse_softplus(1.0 - kScaleFloor);
        }
    }
    return head;
}

void MonotoneHead::set_params(ParamSet params) {
    if (!params.same_layout(params_)) {
        throw std::invalid_argument("parameter layout does not match the head configuration");
    }
    params_ = std::move(params);
}

void MonotoneHead::check_input(std::span<const double> h) const {
    if (h.size() != config_.input_dim) {
        throw std::invalid_argument("head expects " + std::to_string(config_.input_dim) + " features, got " +
                                    std::to_string(h.size()));
    }
}

struct MonotoneHead::Forward {
    std::vector<double> values;  // knot values
    std::vector<std::vector<double>> hidden;  // tanh activations per increment MLP
    std::vector<double> pre;  // increment pre-activations
    struct Segment {
        std::vector<double> share;  // softmax over position logits
        std::vector<double> value_pre;
        std::vector<double> cumulative;  // C_0..C_S of the value increments
    };
    std::vector<Segment> segments;
    std::vector<double> tail_pre;
    std::optional<IsqfCurve> curve;
};

MonotoneHead::Forward MonotoneHead::forward(std::span<const double> h) const {
    check_input(h);
    const auto& c = config_;
    const std::size_t K = c.levels.size();
    const std::size_t S = c.spline_pieces;
    Forward f;
    f.values.resize(K);
    f.hidden.assign(K - 1, std::vector<double>(c.hidden));
    f.pre.resize(K - 1);

    double v0 = 0.0;
    affine(params_.values(0), params_.values(1), h, std::span<double>(&v0, 1));
    f.values[0] = v0;
    for (std::size_t k = 1; k < K; ++k) {
        const std::size_t b = increments_begin_ + 4 * (k - 1);
        auto& a = f.hidden[k - 1];
        affine(params_.values(b), params_.values(b + 1), h, a);
        for (auto& x : a) x = std::tanh(x);
        double o = 0.0;
        affine(params_.values(b + 2), params_.values(b + 3), a, std::span<double>(&o, 1));
        f.pre[k - 1] = o;
        const double inc = c.activation == Activation::Softplus ? softplus(o) : std::max(o, 0.0);
        f.values[k] = f.values[k - 1] + inc;
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (!std::isfinite(f.values[k])) {
            auto block = params_.first_non_finite();
            if (block.empty()) block = k == 0 ? "base" : "inc" + std::to_string(k);
            throw NumericFailure("non-finite knot value at level " + std::to_string(c.levels[k]), block);
        }
    }
    QuantileKnots knots(c.levels, f.values);

    if (c.mode == HeadMode::Iqf) {
        f.curve = IsqfCurve::iqf(knots);
        return f;
    }

    std::vector<SplineSegment> segments;
    segments.reserve(K - 1);
    for (std::size_t k = 0; k + 1 < K; ++k) {
        const double lo = c.levels[k], hi = c.levels[k + 1];
        const double vlo = f.values[k], vhi = f.values[k + 1];
        if (S == 1) {
            segments.push_back(SplineSegment::linear(lo, hi, vlo, vhi));
            f.segments.emplace_back();
            continue;
        }
        const std::size_t b = segments_begin_ + 4 * k;
        Forward::Segment seg;
        std::vector<double> logits(S, 0.0);  // last logit fixed at zero
        affine(params_.values(b), params_.values(b + 1), h, std::span<double>(logits.data(), S - 1));
        const double mx = *std::max_element(logits.begin(), logits.end());
        seg.share.resize(S);
        double z = 0.0;
        for (std::size_t s = 0; s < S; ++s) z += seg.share[s] = std::exp(logits[s] - mx);
        for (auto& x : seg.share) x /= z;

        std::vector<double> d(S + 1);
        d[0] = lo;
        double acc = 0.0;
        const double norm = 1.0 + static_cast<double>(S) * kPositionFloor;
        for (std::size_t s = 1; s < S; ++s) {
            acc += (seg.share[s - 1] + kPositionFloor) / norm;
            d[s] = lo + (hi - lo) * acc;
        }
        d[S] = hi;

        seg.value_pre.resize(S);
        affine(params_.values(b + 2), params_.values(b + 3), h, seg.value_pre);
        seg.cumulative.assign(S + 1, 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            seg.cumulative[s + 1] = seg.cumulative[s] + softplus(seg.value_pre[s]) + kValueFloor;
        }
        const double total = seg.cumulative[S];
        std::vector<double> p(S + 1);
        p[0] = vlo;
        for (std::size_t s = 1; s < S; ++s) {
            p[s] = std::clamp(vlo + (vhi - vlo) * (seg.cumulative[s] / total), p[s - 1], vhi);
        }
        p[S] = vhi;
        segments.emplace_back(std::move(d), std::move(p));
        f.segments.push_back(std::move(seg));
    }

    f.tail_pre.resize(tail_outputs(c));
    affine(params_.values(tail_begin_), params_.values(tail_begin_ + 1), h, f.tail_pre);
    for (double t : f.tail_pre) {
        if (!std::isfinite(t)) throw NumericFailure("non-finite tail parameter", "tail");
    }
    const double left_level = c.levels.front(), right_level = c.levels.back();
    if (c.tail == TailKind::Exponential) {
        f.curve.emplace(knots, std::move(segments),
                        ExponentialTail(Side::Left, softplus(f.tail_pre[0]) + kRateFloor, left_level, f.values.front()),
                        ExponentialTail(Side::Right, softplus(f.tail_pre[1]) + kRateFloor, right_level, f.values.back()));
    } else {
        auto shape = [](double t) { return kMinShape + (kMaxGpdShape - kMinShape) * sigmoid(t); };
        f.curve.emplace(
            knots, std::move(segments),
            GpdTail(Side::Left, shape(f.tail_pre[0]), softplus(f.tail_pre[1]) + kScaleFloor, left_level,
                    f.values.front()),
            GpdTail(Side::Right, shape(f.tail_pre[2]), softplus(f.tail_pre[3]) + kScaleFloor, right_level,
                    f.values.back()));
    }
    return f;
}

IsqfCurve MonotoneHead::decode(std::span<const double> h) const { return *forward(h).curve; }

double MonotoneHead::backward(std::span<const double> h, double z, ParamSet& grad, std::span<double> dh) const {
    if (!grad.same_layout(params_)) {
        throw std::invalid_argument("gradient layout does not match the head");
    }
    if (!dh.empty() && dh.size() != h.size()) {
        throw std::invalid_argument("dh must match the feature dimension");
    }
    const auto f = forward(h);
    const auto& curve = *f.curve;
    const auto& c = config_;
    const std::size_t K = c.levels.size();
    const std::size_t S = c.spline_pieces;
    const double loss = crps(curve, z).total;
    const auto g = crps_gradient(curve, z);
    if (!dh.empty()) std::fill(dh.begin(), dh.end(), 0.0);

    std::vector<double> dv(K, 0.0);
    dv.front() += g.left.anchor_value;
    dv.back() += g.right.anchor_value;

    if (c.mode == HeadMode::Iqf) {
        for (std::size_t k = 0; k + 1 < K; ++k) {
            dv[k] += g.values[k].front();
            dv[k + 1] += g.values[k].back();
        }
        // scale = (gap + eps) / numerator on each side
        const auto [num_left, num_right] = iqf_rate_numerators(curve.knots());
        dv[1] += g.left.scale / num_left;
        dv[0] -= g.left.scale / num_left;
        dv[K - 1] += g.right.scale / num_right;
        dv[K - 2] -= g.right.scale / num_right;
    } else {
        for (std::size_t k = 0; k + 1 < K; ++k) {
            const auto& gp = g.values[k];
            if (S == 1) {
                dv[k] += gp[0];
                dv[k + 1] += gp[1];
                continue;
            }
            const auto& gd = g.positions[k];
            const auto& seg = f.segments[k];
            const double gap = f.values[k + 1] - f.values[k];
            const double total = seg.cumulative[S];
            for (std::size_t s = 0; s <= S; ++s) {
                const double frac = s == 0 ? 0.0 : (s == S ? 1.0 : seg.cumulative[s] / total);
                dv[k] += gp[s] * (1.0 - frac);
                dv[k + 1] += gp[s] * frac;
            }
            // value increments: p_s = v_k + gap * C_s / U for 0 < s < S
            double common = 0.0;
            for (std::size_t s = 1; s < S; ++s) common += gp[s] * seg.cumulative[s];
            common *= gap / (total * total);
            std::vector<double> dvalue_pre(S);
            double suffix = 0.0;
            for (std::size_t j = S; j-- > 0;) {
                // suffix = sum of gp[s] over j < s < S
                const double du = gap / total * suffix - common;
                dvalue_pre[j] = du * sigmoid(seg.value_pre[j]);
                if (j >= 1) suffix += gp[j];
            }
            // positions: d_s = lo + width * sum_{j<s} w_j for 0 < s < S
            const double width = c.levels[k + 1] - c.levels[k];
            const double norm = 1.0 + static_cast<double>(S) * kPositionFloor;
            std::vector<double> dshare(S);
            suffix = 0.0;
            for (std::size_t j = S; j-- > 0;) {
                dshare[j] = width * suffix / norm;
                if (j >= 1) suffix += gd[j];
            }
            double dot = 0.0;
            for (std::size_t s = 0; s < S; ++s) dot += seg.share[s] * dshare[s];
            std::vector<double> dlogit(S - 1);
            for (std::size_t i = 0; i + 1 < S; ++i) dlogit[i] = seg.share[i] * (dshare[i] - dot);

            const std::size_t b = segments_begin_ + 4 * k;
            affine_backward(params_.values(b), h, dlogit, grad.values(b), grad.values(b + 1), dh);
            affine_backward(params_.values(b + 2), h, dvalue_pre, grad.values(b + 2), grad.values(b + 3), dh);
        }

        std::vector<double> dtail(tail_outputs(c));
        if (c.tail == TailKind::Exponential) {
            for (std::size_t side = 0; side < 2; ++side) {
                const double t = f.tail_pre[side];
                const double beta = softplus(t) + kRateFloor;
                const double dscale = side == 0 ? g.left.scale : g.right.scale;
                dtail[side] = -dscale / (beta * beta) * sigmoid(t);
            }
        } else {
            for (std::size_t side = 0; side < 2; ++side) {
                const auto& tg = side == 0 ? g.left : g.right;
                const double ts = sigmoid(f.tail_pre[2 * side]);
                dtail[2 * side] = tg.eta * (kMaxGpdShape - kMinShape) * ts * (1.0 - ts);
                dtail[2 * side + 1] = tg.mu * sigmoid(f.tail_pre[2 * side + 1]);
            }
        }
        affine_backward(params_.values(tail_begin_), h, dtail, grad.values(tail_begin_), grad.values(tail_begin_ + 1),
                        dh);
    }

    // v_k = v_0 + sum of increments up to k
    double suffix = 0.0;
    for (std::size_t k = K; k-- > 1;) {
        suffix += dv[k];
        const double o = f.pre[k - 1];
        const double dpre =
            suffix * (c.activation == Activation::Softplus ? sigmoid(o) : (o > 0.0 ? 1.0 : 0.0));
        const std::size_t b = increments_begin_ + 4 * (k - 1);
        const auto& a = f.hidden[k - 1];
        const double dout = dpre;
        affine_backward(params_.values(b + 2), a, std::span<const double>(&dout, 1), grad.values(b + 2),
                        grad.values(b + 3), {});
        std::vector<double> dhidden(a.size());
        const auto w2 = params_.values(b + 2);
        for (std::size_t i = 0; i < a.size(); ++i) dhidden[i] = dpre * w2[i] * (1.0 - a[i] * a[i]);
        affine_backward(params_.values(b), h, dhidden, grad.values(b), grad.values(b + 1), dh);
    }
    const double dbase = suffix + dv[0];
    affine_backward(params_.values(0), h, std::span<const double>(&dbase, 1), grad.values(0), grad.values(1), dh);
    return loss;
}

void to_json(nlohmann::json& j, const MonotoneHead& head) {
    j = {{"config", head.config()}, {"params", head.params()}};
}

MonotoneHead head_from_json(const nlohmann::json& j) {
    MonotoneHead head(j.at("config").get<HeadConfig>());
    head.set_params(j.at("params").get<ParamSet>());
    return head;
}

double empirical_crps_loss(const MonotoneHead& head, std::span<const Observation> batch) {
    if (batch.empty()) throw std::invalid_argument("empirical CRPS needs a non-empty batch");
    double total = 0.0;
    for (const auto& obs : batch) total += crps(head.decode(obs.features), obs.target).total;
    return total / static_cast<double>(batch.size());
}

double loss_and_gradient(const MonotoneHead& head, std::span<const Observation> batch, ParamSet& grad) {
    if (batch.empty()) throw std::invalid_argument("empirical CRPS needs a non-empty batch");
    grad = head.params().zeros_like();
    double total = 0.0;
    for (const auto& obs : batch) total += head.backward(obs.features, obs.target, grad);
    const double n = static_cast<double>(batch.size());
    for (std::size_t i = 0; i < grad.block_count(); ++i) {
        for (auto& x : grad.values(i)) x /= n;
    }
    return total / n;
}

namespace {

double precise_loss(const MonotoneHead& head, std::span<const Observation> batch) {
    double total = 0.0;
    for (const auto& obs : batch) total += crps(head.decode(obs.features), obs.target, 1e-14).total;
    return total / static_cast<double>(batch.size());
}

} // namespace

GradientReport gradient_check(const MonotoneHead& head, std::span<const Observation> batch, double tol,
                              double step_scale) {
    if (!(tol > 0.0)) throw std::invalid_argument("gradient_check tolerance must be positive");
    GradientReport report;
    report.tolerance = tol;
    ParamSet analytic;
    loss_and_gradient(head, batch, analytic);
    MonotoneHead probe = head;
    const std::size_t n = head.params().total_size();
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = head.params().flat(i);
        const double step = step_scale * std::max(1.0, std::abs(theta));
        auto loss_at = [&](double offset) {
            probe.params().flat(i) = theta + offset;
            return precise_loss(probe, batch);
        };
        const double near = loss_at(step) - loss_at(-step);
        const double far = loss_at(2.0 * step) - loss_at(-2.0 * step);
        probe.params().flat(i) = theta;
        const double fd = (8.0 * near - far) / (12.0 * step);
        const double an = analytic.flat(i);
        const double mag = std::max(std::abs(fd), std::abs(an));
        if (mag <= 1e-8) continue;
        ++report.components_checked;
        const double rel = std::abs(fd - an) / mag;
        if (rel > report.max_relative_discrepancy) {
            report.max_relative_discrepancy = rel;
            report.worst_index = i;
            report.worst_block = head.params().name_of_flat(i);
        }
    }
    report.passed = report.max_relative_discrepancy <= tol;
    return report;
}

FitResult fit(const MonotoneHead& initial, std::span<const Observation> data, const OptimizerConfig& config,
              std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("fit needs a non-empty dataset");
    FitResult out{initial, {}};
    auto& head = out.head;
    out.loss_trace = run_epochs(head.params(), data.size(), config, seed,
                                [&](std::span<const std::size_t> idx, ParamSet& grad) {
                                    grad.fill(0.0);
                                    double total = 0.0;
                                    for (std::size_t i : idx) {
                                        total += head.backward(data[i].features, data[i].target, grad);
                                    }
                                    const double n = static_cast<double>(idx.size());
                                    for (std::size_t b = 0; b < grad.block_count(); ++b) {
                                        for (auto& x : grad.values(b)) x /= n;
                                    }
                                    return total / n;
                                });
    return out;
}

} // namespace isqf
