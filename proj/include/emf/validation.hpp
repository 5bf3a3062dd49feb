#pragma once

#include <functional>

#include "emf/objectives.hpp"

namespace emf {

// max over n1 random unit probes of ||action(v)||_2  (a lower bound on the
// spectral norm; tests compare it against a power-iteration oracle)
double estimate_spectral_norm(const std::function<Tensor(const Tensor&)>& action, std::size_t dim,
                              int n1, Rng& rng);

// power iteration on A^T A for an explicit matrix; oracle for the estimator
double power_iteration_norm(const Tensor& mat, int iters = 100);

struct ValidationConfig {
    int n1 = 16;   // probe vectors per spectral estimate
    int n2 = 256;  // Monte-Carlo draws
    double delta_t = 0.01;
};

struct AssumptionReport {
    double m_g = 0.0; // parameter-Jacobian constant, includes the 1/m factor
    double m_x = 0.0; // spatial-Jacobian constant at the shifted point
    double m_t = 0.0; // d/ds u_{t->s}|_{s=t} magnitude
    bool primed = false;               // x1-prediction variants
    std::string prefactor_form;        // "outside_sqrt" when primed
    int n1 = 0, n2 = 0;
    double delta_t = 0.0;
    bool finite() const;
};

// Monte-Carlo estimate over draws (t, r, x1, x ~ p_t(x|x1)); spectral norms
// per draw via estimate_spectral_norm. For x1-prediction networks the primed
// variants are computed and m_x carries the mean 1/max(1-r, 0.02) prefactor
// outside the square root.
AssumptionReport estimate_assumption_constants(const FlowNetwork& net, const DatasetConfig& data,
                                               const ValidationConfig& vc, Rng& rng);

// ---- gradient-equivalence checks ---------------------------------------------

using ObjectiveFn = std::function<ObjectiveResult(const FlowNetwork&, const TrainingBatch&)>;

struct GradCheckReport {
    double rmse = 0.0;  // sqrt(mean over parameter coordinates of (g_a - g_b)^2)
    double bound = 0.0; // M_g-hat * sqrt(mean ||u_{t->t} - u_t||^2), same draws
    bool has_bound = false;
    bool pass = false;  // rmse <= bound when present, else rmse finite
};

// Flattened-parameter RMSE between the gradients of two objectives on one
// batch. With lemma_bound set the inequality's right-hand side is computed on
// the same draws and compared.
GradCheckReport gradient_rmse(const FlowNetwork& net, const TrainingBatch& batch,
                              const ObjectiveFn& loss_a, const ObjectiveFn& loss_b,
                              bool lemma_bound = false);

// Bound value 2 * M_g-hat * sqrt(mean_i ||u_{t->t}(x_i) - u_t(x_i|x1_i)||^2) on
// the batch's draws. M_g-hat uses the exact per-draw spectral norm of the
// parameter Jacobian (closed form from the Gram matrix of its two rows), so the
// Cauchy-Schwarz chain behind the inequality holds on the empirical measure
// itself; the factor 2 is the squared-error derivative.
double anchor_gap_bound(const FlowNetwork& net, const TrainingBatch& batch);

// ---- single-datapoint inequality harness ---------------------------------------
// With p_data collapsed to one point, u_t(x) = u_t(x|x1) exactly, so both sides
// of the inequality are computable on a fixed draw set with no approximation.

struct LemmaHarnessConfig {
    int n_random_cases = 32; // freshly initialized networks
    int batch = 1024;        // fixed draw set (shared by every case)
    int hidden_width = 16, depth = 2, time_features = 2;
    double delta_t = 0.01;
    long pretrain_max_steps = 20000; // full-batch budget for the pre-trained case
    double pretrain_tol = 1e-6;
    double pretrain_lr = 1e-2;
    double x1_x = 1.25, x1_y = -0.75; // the single data point
};

struct LemmaCaseResult {
    int case_id = 0;
    bool pretrained = false;
    double fm_value = 0.0; // mean ||u_{t->t} - u_t||^2 on the fixed draws
    double rmse = 0.0;
    double bound = 0.0;
    bool pass = false; // rmse <= bound
};

// n_random_cases random-net checks plus one pre-trained check (last row)
std::vector<LemmaCaseResult> run_lemma_harness(const LemmaHarnessConfig& hc, std::uint64_t seed);

// ---- discretization-order sweep ------------------------------------------------

// batch with t ~ U[0, 0.5] and r ~ U[t + 0.2, 1]: the bootstrap clamp stays
// active across the whole swept dt range
TrainingBatch make_sweep_batch(const DatasetConfig& data, int batch, Rng& rng);

struct SweepPoint {
    double delta_t;
    double rmse;
};
struct SweepResult {
    std::vector<SweepPoint> points;
    double slope = 0.0;     // log-log least-squares slope
    bool degenerate = false; // some rmse was zero; slope undefined
};

// rmse between gradients of the approximated and the s = t + dt consistency
// losses, on the same batch, for each dt
SweepResult delta_t_order_sweep(const FlowNetwork& net, const TrainingBatch& batch,
                                const std::vector<double>& dts);

// ---- engine self-check (CLI `gradcheck`) ---------------------------------------

struct GradcheckReport {
    int models = 0;
    double max_rel_err_reverse = 0.0;
    double max_rel_err_jvp = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// random small networks: reverse-mode vs central differences on a scalar loss,
// and jvp vs finite-difference directional derivatives
GradcheckReport run_gradcheck(int n_models, std::uint64_t seed, double fd_step = 1e-5, double tol = 1e-5);

} // namespace emf
