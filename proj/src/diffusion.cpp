#include "dfbk/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace dfbk {

DiffusionSchedule make_schedule(int steps, double eta1, double etaT, double kappa) {
    if (steps < 1) throw ValidationError("make_schedule: T must be >= 1");
    if (kappa <= 0) throw ValidationError("make_schedule: kappa must be positive");
    if (!(etaT > 0) || etaT > 1.0) throw ValidationError("make_schedule: etaT must be in (0, 1]");
    if (etaT < 0.99) throw ValidationError("make_schedule: etaT must be >= 0.99 (eta_T -> 1)");
    if (steps > 1) {
        if (!(eta1 > 0) || eta1 >= etaT)
            throw ValidationError("make_schedule: need 0 < eta1 < etaT");
        if (eta1 > 0.1) throw ValidationError("make_schedule: eta1 must be <= 0.1 (eta_1 -> 0)");
    }

    DiffusionSchedule s;
    s.steps = steps;
    s.kappa = kappa;
    s.eta.assign(steps + 1, 0.0);
    for (int t = 1; t <= steps; ++t) {
        s.eta[t] = steps == 1
                       ? etaT
                       : eta1 * std::pow(etaT / eta1,
                                         static_cast<double>(t - 1) / (steps - 1));
    }
    s.alpha.assign(steps + 1, 0.0);
    for (int t = 1; t <= steps; ++t) s.alpha[t] = s.eta[t] - s.eta[t - 1];
    return s;
}

FeatureMap forward_sample(const FeatureMap& target, const FeatureMap& source, int t,
                          const DiffusionSchedule& s, RandomStream& rng) {
    s.check_t(t);
    if (!target.same_shape(source))
        throw ShapeError("forward_sample: target " + target.shape_str() + " vs source " +
                         source.shape_str());
    const double eta = s.eta[t];
    const double noise_scale = s.kappa * std::sqrt(eta);
    FeatureMap out = target;
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] += eta * (source.v[i] - target.v[i]);
    if (noise_scale > 0)
        for (auto& x : out.v) x += noise_scale * rng.normal();
    return out;
}

FeatureMap reverse_step(const FeatureMap& x_t, const FeatureMap& f_pred, const FeatureMap& source,
                        int t, const DiffusionSchedule& s, RandomStream& rng) {
    s.check_t(t);
    if (!x_t.same_shape(f_pred) || !x_t.same_shape(source))
        throw ShapeError("reverse_step: shape mismatch");
    if (t == 1) return f_pred;  // eta_0 = 0: mean is f_pred, variance vanishes

    const double ratio = s.eta[t - 1] / s.eta[t];
    const double pred_coef = s.alpha[t] / s.eta[t];
    const double sigma = s.kappa * std::sqrt(ratio * s.alpha[t]);
    FeatureMap out(x_t.h, x_t.w, x_t.c);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = ratio * x_t.v[i] + pred_coef * f_pred.v[i];
    if (sigma > 0)
        for (auto& x : out.v) x += sigma * rng.normal();
    return out;
}

double loss_weight(int t, const DiffusionSchedule& s, WeightMode mode) {
    if (mode == WeightMode::Unit) return 1.0;
    s.check_t(t);
    const double eta_prev = std::max(s.eta[t - 1], 1e-4);
    return s.alpha[t] / (2.0 * s.kappa * s.kappa * s.eta[t] * eta_prev);
}

FeatureMap translate(const FeatureMap& source, const DenoiseFn& model,
                     const TextEmbedding& context, const DiffusionSchedule& s, RandomStream& rng) {
    const double init_scale = s.kappa * std::sqrt(s.eta[s.steps]);
    FeatureMap x = source;
    if (init_scale > 0)
        for (auto& v : x.v) v += init_scale * rng.normal();

    for (int t = s.steps; t >= 1; --t) {
        FeatureMap pred = model(x, source, t, context);
        if (!pred.same_shape(source))
            throw ShapeError("translate: model output " + pred.shape_str() +
                             " does not match source " + source.shape_str());
        x = reverse_step(x, pred, source, t, s, rng);
    }
    for (auto& v : x.v) v = std::clamp(v, 0.0, 1.0);
    return x;
}

}  // namespace dfbk
