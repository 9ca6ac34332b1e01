#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace hired::theory {

/// Two-level linear model: a root and L children, each y = B theta + w over a
/// K-column basis drawn from a larger dictionary.
struct TheoryInstance {
    Eigen::MatrixXd dictionary;          // T x D, columns scaled to norm sqrt(T)
    std::vector<std::size_t> support;    // ascending, size K
    Eigen::MatrixXd basis;               // T x K, dictionary restricted to the support
    Eigen::VectorXd theta0;              // K
    std::vector<Eigen::VectorXd> perturbations;  // theta_n - theta0, mean zero, max norm beta
    std::vector<Eigen::VectorXd> theta;  // L children
    Eigen::VectorXd y0;
    std::vector<Eigen::VectorXd> y;
    Eigen::VectorXd w0;                  // mean of the children's noise
    std::vector<Eigen::VectorXd> w;
    double sigma = 1.0;
    double beta = 0.0;

    [[nodiscard]] std::size_t steps() const { return static_cast<std::size_t>(dictionary.rows()); }
    [[nodiscard]] std::size_t children() const { return theta.size(); }
    [[nodiscard]] std::size_t rank() const { return support.size(); }
};

struct InstanceOptions {
    std::size_t steps = 200;       // T
    std::size_t dictionary = 50;   // D
    std::size_t rank = 5;          // K
    std::size_t children = 10;     // L
    double sigma = 1.0;
    double beta = 0.0;
    /// Root entries are N(0, 1) when 0; otherwise random sign times a
    /// magnitude uniform in [theta_min, 2 theta_min].
    double theta_min = 0.0;
};

/**
 * Draws a coherent instance: the root observation is the mean of its
 * children's, so y0 = B theta0 + w0 with w0 ~ N(0, sigma^2 I / L).
 */
TheoryInstance generate_instance(const InstanceOptions& options, std::uint64_t seed);

/// Replaces theta0 (children follow through the stored perturbations) and
/// recomputes the observations with the current noise.
void set_root_params(TheoryInstance& instance, const Eigen::VectorXd& theta0);

/// Draws fresh noise and recomputes every observation.
void resample_noise(TheoryInstance& instance, std::mt19937_64& rng);

/// Independent per-(seed, trial, stream) generator.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

struct LassoResult {
    Eigen::VectorXd coef;
    std::size_t iterations = 0;  // full coordinate sweeps
    bool converged = false;
    double last_change = 0.0;    // largest coordinate change in the final sweep
};

double soft_threshold(double x, double lambda);

/**
 * Cyclic coordinate descent for (1/2T)||y - X a||^2 + lambda ||a||_1, where
 * T is the number of rows. Stops when no coordinate moves by tol or more in a
 * sweep; otherwise returns after max_iter sweeps with converged = false.
 */
LassoResult lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, double tol = 1e-8,
                     std::size_t max_iter = 10000);

/// Coefficients with magnitude above this are treated as nonzero.
inline constexpr double kSupportThreshold = 1e-10;

struct SupportEstimate {
    std::vector<std::size_t> support;
    Eigen::MatrixXd basis;
    LassoResult lasso;
};

/// Lasso on the root series over the whole dictionary.
SupportEstimate alg1_basis_recovery(const TheoryInstance& instance, double lambda);

struct ParamEstimate {
    Eigen::VectorXd theta0;
    std::vector<Eigen::VectorXd> psi;    // theta_n - theta0 estimates
    std::vector<Eigen::VectorXd> theta;  // theta0 + psi
};

inline constexpr double kInfiniteRidge = std::numeric_limits<double>::infinity();

/**
 * OLS on the root, then per child the ridge problem shrinking toward the root
 * estimate, solved as psi = T^-1 (Sigma + lambda I)^-1 B^T (y_n - B theta0)
 * with a Cholesky factorization. lambda = infinity gives theta_n = theta0.
 */
ParamEstimate alg2_param_recovery(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y0,
                                  const std::vector<Eigen::VectorXd>& y, double lambda);
ParamEstimate alg2_param_recovery(const TheoryInstance& instance, const Eigen::MatrixXd& basis, double lambda);

/// Objective (1/T)||y - B theta||^2 + lambda ||theta0 - theta||^2.
double alg2_objective(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, const Eigen::VectorXd& theta0,
                      const Eigen::VectorXd& theta, double lambda);

/// Ordinary least squares; throws NumericError when the basis is rank deficient.
Eigen::VectorXd ols(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y);
std::vector<Eigen::VectorXd> ols_baseline(const TheoryInstance& instance, const Eigen::MatrixXd& basis);

/// ||d||^2_Sigma as the quadratic form d^T (B^T B / T) d.
double sigma_norm_sq(const Eigen::MatrixXd& basis, const Eigen::VectorXd& d);
/// ||d||^2_Sigma as ||B d||^2 / T.
double prediction_norm_sq(const Eigen::MatrixXd& basis, const Eigen::VectorXd& d);

struct AssumptionReport {
    double c_min = 0.0;
    double incoherence = 0.0;
    double gamma = 0.0;
    double lambda_lower = 0.0;        // (2/gamma) sqrt(2 sigma^2 log D / (L T)); infinite when gamma <= 0
    double sigma_inv_norm = 0.0;      // |||(B_S^T B_S / T)^-1|||_inf
    double signal_threshold = 0.0;    // g(lambda_lower)
    double theta_min = 0.0;           // min |theta0|
    double max_column_norm = 0.0;     // over the dictionary, compared with sqrt(T)

    [[nodiscard]] bool eigen_ok() const { return c_min > 0.0; }
    [[nodiscard]] bool incoherence_ok() const { return gamma > 0.0 && gamma <= 1.0; }
    [[nodiscard]] bool signal_ok() const { return theta_min >= signal_threshold; }
    [[nodiscard]] bool passed() const { return eigen_ok() && incoherence_ok() && signal_ok(); }
};

/// g(lambda) = lambda (|||Sigma^-1|||_inf + 4 sigma / sqrt(L C_min)).
double signal_threshold(const AssumptionReport& report, double lambda, double sigma, std::size_t children);

/// Max absolute row sum.
double inf_norm(const Eigen::MatrixXd& m);

/// Throws NumericError when B_S^T B_S is singular.
AssumptionReport check_assumptions(const TheoryInstance& instance);

/// 3 (s2K/T) / (1 + s2K/(T r^2 beta^2)) + 6 s2K/(T L); the first term vanishes at beta = 0.
double theorem1_bound(double sigma, std::size_t rank, std::size_t steps, double r, double beta, std::size_t children);
/// r^2 beta^2 s2K / (T r^2 beta^2 + s2K).
double ridge_bound(double sigma, std::size_t rank, std::size_t steps, double r, double beta);
/// sigma^2 K / (T beta^2), or infinity at beta = 0.
double theorem1_lambda(double sigma, std::size_t rank, std::size_t steps, double beta);

struct Theorem1Options {
    std::size_t steps = 200;
    std::size_t rank = 5;
    std::size_t children = 10;
    double sigma = 1.0;
    std::vector<double> betas = {0.0, 0.01, 0.1, 1.0};
    double r = 0.0;  // row-norm bound; <= 0 uses the design's largest row norm
    std::size_t trials = 2000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct Theorem1Row {
    double beta = 0.0;
    std::size_t children = 0;
    double lambda = 0.0;
    double r = 0.0;
    double emp_reg = 0.0;
    double emp_unreg = 0.0;
    double bound_reg = 0.0;
    double bound_unreg = 0.0;
    double se_reg = 0.0;
    double se_unreg = 0.0;
    double emp_root = 0.0;        // E||theta0_hat - theta0||^2_Sigma
    double emp_aux = 0.0;         // E||psi_tilde - (theta_n - theta0)||^2_Sigma
    double se_aux = 0.0;
    double bound_aux = 0.0;       // ridge_bound
    double max_identity_gap = 0.0;  // largest |quadratic form - prediction norm|
    double max_decomposition_gap = 0.0;  // largest |theta_hat - theta0_hat - psi_hat|

    [[nodiscard]] bool reg_within_bound() const { return emp_reg + 3.0 * se_reg <= bound_reg; }
    [[nodiscard]] bool unreg_within_bound() const { return emp_unreg - 3.0 * se_unreg <= bound_unreg; }
    [[nodiscard]] bool aux_within_bound() const { return emp_aux - 3.0 * se_aux <= bound_aux; }
};

/**
 * Monte Carlo over noise draws for a fixed design per beta. Each trial
 * averages the per-child errors; means and standard errors are across trials.
 */
std::vector<Theorem1Row> mc_theorem1(const Theorem1Options& options);

/// CSV `beta,L,emp_reg,emp_unreg,bound_reg,bound_unreg,se_reg,se_unreg`.
std::string theorem1_csv(const std::vector<Theorem1Row>& rows);

struct Lemma1Options {
    std::size_t steps = 200;
    std::size_t dictionary = 50;
    std::size_t rank = 5;
    std::size_t children = 10;
    double sigma = 0.1;
    double min_gamma = 0.3;
    double min_c_min = 0.5;
    /// Root magnitudes are drawn in [margin g, 2 margin g].
    double signal_margin = 1.0;
    std::size_t trials = 200;
    std::size_t max_attempts = 100;  // design redraws per trial
    std::uint64_t seed = 0;
};

struct Lemma1Trial {
    std::size_t attempts = 0;
    double gamma = 0.0;
    double c_min = 0.0;
    double lambda = 0.0;
    double threshold = 0.0;
    double theta_min = 0.0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    bool converged = false;
    bool recovered = false;
};

struct Lemma1Result {
    std::vector<Lemma1Trial> trials;
    std::size_t recovered = 0;
    std::size_t skipped = 0;  // trials with no design meeting the conditions

    [[nodiscard]] double recovery_rate() const {
        const std::size_t n = trials.size();
        return n == 0 ? 0.0 : static_cast<double>(recovered) / static_cast<double>(n);
    }
};

/// Support-recovery experiment with per-trial assumption checks and lambda at its lower bound.
Lemma1Result lemma1_experiment(const Lemma1Options& options);

/// CSV `trial,attempts,gamma,c_min,lambda,threshold,theta_min,false_pos,false_neg,converged,recovered`.
std::string lemma1_csv(const Lemma1Result& result);

}  // namespace hired::theory
