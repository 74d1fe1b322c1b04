#pragma once

#include <functional>

#include "dfbk/common.hpp"
#include "dfbk/knowledge.hpp"
#include "dfbk/rng.hpp"

namespace dfbk {

// Residual-shifting schedule: eta grows monotonically from eta_1 ~ 0 to
// eta_T ~ 1, alpha_t = eta_t - eta_{t-1}, and kappa scales the Gaussian
// noise of both the forward and reverse processes. eta[0] = 0 by
// construction, which makes the final reverse step deterministic.
struct DiffusionSchedule {
    int steps = 0;                // T
    std::vector<double> eta;      // eta[0..T]
    std::vector<double> alpha;    // alpha[t] = eta[t] - eta[t-1]; alpha[0] unused
    double kappa = 0.0;

    void check_t(int t) const {
        if (t < 1 || t > steps)
            throw ValidationError("timestep " + std::to_string(t) + " outside 1.." +
                                  std::to_string(steps));
    }
};

// Geometric interpolation between eta_1 and eta_T. For T = 1 the schedule
// degenerates to {0, eta_T} and eta1 is not used.
DiffusionSchedule make_schedule(int steps, double eta1, double etaT, double kappa);

// Draws from the closed-form marginal q(x_t | x_0, y_0):
//   x_t = x_0 + eta_t * (y_0 - x_0) + kappa * sqrt(eta_t) * eps.
FeatureMap forward_sample(const FeatureMap& target, const FeatureMap& source, int t,
                          const DiffusionSchedule& s, RandomStream& rng);

// One reverse posterior step given the network's clean-image prediction:
//   mean = (eta_{t-1}/eta_t) x_t + (alpha_t/eta_t) f_pred,
//   var  = kappa^2 (eta_{t-1}/eta_t) alpha_t.
// At t = 1 this collapses to f_pred exactly (zero variance), no rng drawn.
FeatureMap reverse_step(const FeatureMap& x_t, const FeatureMap& f_pred, const FeatureMap& source,
                        int t, const DiffusionSchedule& s, RandomStream& rng);

enum class WeightMode { Unit, Elbo };

// Per-timestep objective weight. Elbo mode reproduces the analytic
// coefficient alpha_t / (2 kappa^2 eta_t eta_{t-1}) with eta_0 floored at
// 1e-4 because the exact expression is singular there.
double loss_weight(int t, const DiffusionSchedule& s, WeightMode mode);

using DenoiseFn = std::function<FeatureMap(const FeatureMap& x_t, const FeatureMap& source, int t,
                                           const TextEmbedding& context)>;

// Full translation sampler: initializes at the t = T marginal around the
// source image and walks the reverse chain down to the deterministic final
// step. The result is clipped to [0, 1].
FeatureMap translate(const FeatureMap& source, const DenoiseFn& model, const TextEmbedding& context,
                     const DiffusionSchedule& s, RandomStream& rng);

}  // namespace dfbk
