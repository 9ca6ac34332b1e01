#include "hired/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "hired/csv.hpp"
#include "hired/error.hpp"

namespace hired::theory {

namespace {

Eigen::VectorXd gaussian_vector(std::size_t n, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, sd);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v(i) = dist(rng);
    }
    return v;
}

void refresh_observations(TheoryInstance& inst) {
    const std::size_t L = inst.perturbations.size();
    inst.theta.resize(L);
    inst.y.resize(L);
    for (std::size_t n = 0; n < L; ++n) {
        inst.theta[n] = inst.theta0 + inst.perturbations[n];
        inst.y[n] = inst.basis * inst.theta[n] + inst.w[n];
    }
    inst.y0 = inst.basis * inst.theta0 + inst.w0;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe out;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) {
        return out;
    }
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - out.mean) * (x - out.mean);
        }
        out.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return out;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

}  // namespace

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

TheoryInstance generate_instance(const InstanceOptions& o, std::uint64_t seed) {
    if (o.rank == 0 || o.rank > o.dictionary) {
        throw ConfigError("rank K=" + std::to_string(o.rank) + " must be in [1, D=" + std::to_string(o.dictionary) +
                          "]");
    }
    if (o.children == 0) {
        throw ConfigError("at least one child is required");
    }
    if (o.steps < o.rank) {
        throw ConfigError("T=" + std::to_string(o.steps) + " is smaller than K=" + std::to_string(o.rank));
    }
    if (!(o.sigma >= 0.0) || !(o.beta >= 0.0)) {
        throw ConfigError("sigma and beta must be nonnegative");
    }
    std::mt19937_64 rng(seed);
    TheoryInstance inst;
    inst.sigma = o.sigma;
    inst.beta = o.beta;
    const auto T = static_cast<Eigen::Index>(o.steps);
    const auto D = static_cast<Eigen::Index>(o.dictionary);
    std::normal_distribution<double> normal(0.0, 1.0);
    inst.dictionary.resize(T, D);
    for (Eigen::Index j = 0; j < D; ++j) {
        for (Eigen::Index t = 0; t < T; ++t) {
            inst.dictionary(t, j) = normal(rng);
        }
        inst.dictionary.col(j) *= std::sqrt(static_cast<double>(T)) / inst.dictionary.col(j).norm();
    }
    std::vector<std::size_t> idx(o.dictionary);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < o.rank; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, o.dictionary - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    inst.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(o.rank));
    std::sort(inst.support.begin(), inst.support.end());
    inst.basis.resize(T, static_cast<Eigen::Index>(o.rank));
    for (std::size_t k = 0; k < o.rank; ++k) {
        inst.basis.col(static_cast<Eigen::Index>(k)) = inst.dictionary.col(static_cast<Eigen::Index>(inst.support[k]));
    }
    inst.theta0.resize(static_cast<Eigen::Index>(o.rank));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index k = 0; k < inst.theta0.size(); ++k) {
        if (o.theta_min > 0.0) {
            const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
            inst.theta0(k) = sign * o.theta_min * (1.0 + unit(rng));
        } else {
            inst.theta0(k) = normal(rng);
        }
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(o.rank));
    for (std::size_t n = 0; n < o.children; ++n) {
        inst.perturbations.push_back(gaussian_vector(o.rank, 1.0, rng));
        mean += inst.perturbations.back();
    }
    mean /= static_cast<double>(o.children);
    double max_norm = 0.0;
    for (auto& p : inst.perturbations) {
        p -= mean;
        max_norm = std::max(max_norm, p.norm());
    }
    for (auto& p : inst.perturbations) {
        p = (max_norm > 0.0 && o.beta > 0.0) ? Eigen::VectorXd(p * (o.beta / max_norm))
                                             : Eigen::VectorXd::Zero(p.size());
    }
    resample_noise(inst, rng);
    return inst;
}

void set_root_params(TheoryInstance& instance, const Eigen::VectorXd& theta0) {
    if (theta0.size() != instance.basis.cols()) {
        throw ShapeError("root parameters have length " + std::to_string(theta0.size()) + ", basis has " +
                         std::to_string(instance.basis.cols()) + " columns");
    }
    instance.theta0 = theta0;
    refresh_observations(instance);
}

void resample_noise(TheoryInstance& inst, std::mt19937_64& rng) {
    const std::size_t L = inst.perturbations.size();
    const std::size_t T = static_cast<std::size_t>(inst.dictionary.rows());
    inst.w.resize(L);
    inst.w0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
    for (std::size_t n = 0; n < L; ++n) {
        inst.w[n] = gaussian_vector(T, inst.sigma, rng);
        inst.w0 += inst.w[n];
    }
    inst.w0 /= static_cast<double>(L);
    refresh_observations(inst);
}

double soft_threshold(double x, double lambda) {
    if (x > lambda) return x - lambda;
    if (x < -lambda) return x + lambda;
    return 0.0;
}

LassoResult lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, double tol,
                     std::size_t max_iter) {
    if (x.rows() != y.size()) {
        throw ShapeError("lasso: design has " + std::to_string(x.rows()) + " rows, response has " +
                         std::to_string(y.size()));
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lasso penalty must be finite and nonnegative");
    }
    const auto T = static_cast<double>(x.rows());
    const Eigen::Index D = x.cols();
    const Eigen::VectorXd col_sq = x.colwise().squaredNorm().transpose() / T;
    LassoResult out;
    out.coef = Eigen::VectorXd::Zero(D);
    Eigen::VectorXd residual = y;
    for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < D; ++j) {
            if (col_sq(j) == 0.0) {
                continue;
            }
            const double old = out.coef(j);
            const double rho = x.col(j).dot(residual) / T + col_sq(j) * old;
            const double updated = soft_threshold(rho, lambda) / col_sq(j);
            const double delta = updated - old;
            if (delta != 0.0) {
                residual -= delta * x.col(j);
                out.coef(j) = updated;
            }
            max_change = std::max(max_change, std::abs(delta));
        }
        out.iterations = sweep + 1;
        out.last_change = max_change;
        if (max_change < tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

SupportEstimate alg1_basis_recovery(const TheoryInstance& instance, double lambda) {
    SupportEstimate out;
    out.lasso = lasso_cd(instance.dictionary, instance.y0, lambda);
    for (Eigen::Index j = 0; j < out.lasso.coef.size(); ++j) {
        if (std::abs(out.lasso.coef(j)) > kSupportThreshold) {
            out.support.push_back(static_cast<std::size_t>(j));
        }
    }
    out.basis.resize(instance.dictionary.rows(), static_cast<Eigen::Index>(out.support.size()));
    for (std::size_t k = 0; k < out.support.size(); ++k) {
        out.basis.col(static_cast<Eigen::Index>(k)) = instance.dictionary.col(static_cast<Eigen::Index>(out.support[k]));
    }
    return out;
}

Eigen::VectorXd ols(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y) {
    if (basis.rows() != y.size()) {
        throw ShapeError("ols: basis has " + std::to_string(basis.rows()) + " rows, response has " +
                         std::to_string(y.size()));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
    if (qr.rank() < basis.cols()) {
        throw NumericError("rank-deficient basis: rank " + std::to_string(qr.rank()) + " for " +
                           std::to_string(basis.cols()) + " columns");
    }
    return qr.solve(y);
}

ParamEstimate alg2_param_recovery(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y0,
                                  const std::vector<Eigen::VectorXd>& y, double lambda) {
    if (!(lambda >= 0.0)) {
        throw ConfigError("ridge penalty must be nonnegative");
    }
    ParamEstimate out;
    out.theta0 = ols(basis, y0);
    const auto K = basis.cols();
    const auto T = static_cast<double>(basis.rows());
    if (std::isinf(lambda)) {
        for (std::size_t n = 0; n < y.size(); ++n) {
            out.psi.push_back(Eigen::VectorXd::Zero(K));
            out.theta.push_back(out.theta0);
        }
        return out;
    }
    const Eigen::MatrixXd system = basis.transpose() * basis / T + lambda * Eigen::MatrixXd::Identity(K, K);
    Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericError("Sigma + lambda I is not positive definite (lambda = " + csv::format_double(lambda) + ")");
    }
    const Eigen::VectorXd fitted_root = basis * out.theta0;
    for (const auto& yn : y) {
        if (yn.size() != basis.rows()) {
            throw ShapeError("child series length " + std::to_string(yn.size()) + " does not match T=" +
                             std::to_string(basis.rows()));
        }
        Eigen::VectorXd psi = llt.solve(basis.transpose() * (yn - fitted_root) / T);
        out.theta.push_back(out.theta0 + psi);
        out.psi.push_back(std::move(psi));
    }
    return out;
}

ParamEstimate alg2_param_recovery(const TheoryInstance& instance, const Eigen::MatrixXd& basis, double lambda) {
    return alg2_param_recovery(basis, instance.y0, instance.y, lambda);
}

double alg2_objective(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, const Eigen::VectorXd& theta0,
                      const Eigen::VectorXd& theta, double lambda) {
    const auto T = static_cast<double>(basis.rows());
    return (y - basis * theta).squaredNorm() / T + lambda * (theta0 - theta).squaredNorm();
}

std::vector<Eigen::VectorXd> ols_baseline(const TheoryInstance& instance, const Eigen::MatrixXd& basis) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(instance.y.size());
    for (const auto& yn : instance.y) {
        out.push_back(ols(basis, yn));
    }
    return out;
}

double sigma_norm_sq(const Eigen::MatrixXd& basis, const Eigen::VectorXd& d) {
    const Eigen::MatrixXd sigma = basis.transpose() * basis / static_cast<double>(basis.rows());
    return d.dot(sigma * d);
}

double prediction_norm_sq(const Eigen::MatrixXd& basis, const Eigen::VectorXd& d) {
    return (basis * d).squaredNorm() / static_cast<double>(basis.rows());
}

double inf_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double signal_threshold(const AssumptionReport& report, double lambda, double sigma, std::size_t children) {
    if (!std::isfinite(lambda) || report.c_min <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return lambda * (report.sigma_inv_norm + 4.0 * sigma / std::sqrt(static_cast<double>(children) * report.c_min));
}

AssumptionReport check_assumptions(const TheoryInstance& inst) {
    const auto T = static_cast<double>(inst.dictionary.rows());
    const auto D = inst.dictionary.cols();
    const auto K = inst.basis.cols();
    const Eigen::MatrixXd gram = inst.basis.transpose() * inst.basis / T;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    AssumptionReport r;
    r.c_min = K > 0 ? eig.eigenvalues().minCoeff() : 0.0;
    if (!(r.c_min > 1e-12)) {
        throw NumericError("B_S^T B_S is singular (smallest eigenvalue " + csv::format_double(r.c_min * T) + ")");
    }
    const Eigen::MatrixXd gram_inv = gram.llt().solve(Eigen::MatrixXd::Identity(K, K));
    r.sigma_inv_norm = inf_norm(gram_inv);
    std::vector<bool> in_support(static_cast<std::size_t>(D), false);
    for (std::size_t s : inst.support) {
        in_support[s] = true;
    }
    Eigen::MatrixXd off(D - K, K);
    Eigen::Index row = 0;
    for (Eigen::Index j = 0; j < D; ++j) {
        if (!in_support[static_cast<std::size_t>(j)]) {
            off.row(row++) = inst.dictionary.col(j).transpose() * inst.basis / T;
        }
    }
    r.incoherence = inf_norm(off * gram_inv);
    r.gamma = 1.0 - r.incoherence;
    const auto L = static_cast<double>(inst.children());
    r.lambda_lower = r.gamma > 0.0
                         ? (2.0 / r.gamma) * std::sqrt(2.0 * inst.sigma * inst.sigma * std::log(static_cast<double>(D)) / (L * T))
                         : std::numeric_limits<double>::infinity();
    r.signal_threshold = signal_threshold(r, r.lambda_lower, inst.sigma, inst.children());
    r.theta_min = K > 0 ? inst.theta0.cwiseAbs().minCoeff() : 0.0;
    r.max_column_norm = inst.dictionary.colwise().norm().maxCoeff();
    return r;
}

double theorem1_lambda(double sigma, std::size_t rank, std::size_t steps, double beta) {
    if (beta <= 0.0) {
        return kInfiniteRidge;
    }
    return sigma * sigma * static_cast<double>(rank) / (static_cast<double>(steps) * beta * beta);
}

double ridge_bound(double sigma, std::size_t rank, std::size_t steps, double r, double beta) {
    const double s2k = sigma * sigma * static_cast<double>(rank);
    const double rb = r * r * beta * beta;
    const double denom = static_cast<double>(steps) * rb + s2k;
    return denom > 0.0 ? rb * s2k / denom : 0.0;
}

double theorem1_bound(double sigma, std::size_t rank, std::size_t steps, double r, double beta, std::size_t children) {
    const double s2k_t = sigma * sigma * static_cast<double>(rank) / static_cast<double>(steps);
    return 3.0 * ridge_bound(sigma, rank, steps, r, beta) + 6.0 * s2k_t / static_cast<double>(children);
}

std::vector<Theorem1Row> mc_theorem1(const Theorem1Options& o) {
    if (o.trials < 2) {
        throw ConfigError("at least two trials are needed for a standard error");
    }
    std::vector<Theorem1Row> rows;
    for (std::size_t bi = 0; bi < o.betas.size(); ++bi) {
        const double beta = o.betas[bi];
        InstanceOptions io;
        io.steps = o.steps;
        io.dictionary = o.rank;
        io.rank = o.rank;
        io.children = o.children;
        io.sigma = o.sigma;
        io.beta = beta;
        const TheoryInstance design = generate_instance(io, trial_rng(o.seed, 0, 1 + bi)());
        const Eigen::MatrixXd& B = design.basis;
        const double T = static_cast<double>(o.steps);
        Theorem1Row row;
        row.beta = beta;
        row.children = o.children;
        row.lambda = theorem1_lambda(o.sigma, o.rank, o.steps, beta);
        row.r = o.r > 0.0 ? o.r : B.rowwise().norm().maxCoeff();
        row.bound_reg = theorem1_bound(o.sigma, o.rank, o.steps, row.r, beta, o.children);
        row.bound_unreg = o.sigma * o.sigma * static_cast<double>(o.rank) / T;
        row.bound_aux = ridge_bound(o.sigma, o.rank, o.steps, row.r, beta);

        std::vector<double> reg(o.trials), unreg(o.trials), root(o.trials), aux(o.trials);
        std::vector<double> identity_gap(o.trials), decomposition_gap(o.trials);
        const Eigen::MatrixXd gram = B.transpose() * B / T;
        parallel_for(o.trials, o.threads, [&](std::size_t t) {
            TheoryInstance inst = design;
            std::mt19937_64 rng = trial_rng(o.seed, t + 1, 1 + bi);
            resample_noise(inst, rng);
            const ParamEstimate est = alg2_param_recovery(inst, B, row.lambda);
            const std::vector<Eigen::VectorXd> base = ols_baseline(inst, B);
            double sr = 0.0, su = 0.0, sa = 0.0, gap = 0.0, dgap = 0.0;
            for (std::size_t n = 0; n < inst.children(); ++n) {
                const Eigen::VectorXd d = est.theta[n] - inst.theta[n];
                const double a = prediction_norm_sq(B, d);
                gap = std::max(gap, std::abs(a - d.dot(gram * d)));
                sr += a;
                su += prediction_norm_sq(B, base[n] - inst.theta[n]);
                dgap = std::max(dgap, (est.theta[n] - est.theta0 - est.psi[n]).cwiseAbs().maxCoeff());
                Eigen::VectorXd psi_tilde = Eigen::VectorXd::Zero(B.cols());
                if (std::isfinite(row.lambda)) {
                    const Eigen::MatrixXd sys = gram + row.lambda * Eigen::MatrixXd::Identity(B.cols(), B.cols());
                    psi_tilde = sys.llt().solve(B.transpose() * (inst.y[n] - B * inst.theta0) / T);
                }
                sa += prediction_norm_sq(B, psi_tilde - inst.perturbations[n]);
            }
            const auto L = static_cast<double>(inst.children());
            reg[t] = sr / L;
            unreg[t] = su / L;
            aux[t] = sa / L;
            root[t] = prediction_norm_sq(B, est.theta0 - inst.theta0);
            identity_gap[t] = gap;
            decomposition_gap[t] = dgap;
        });
        const MeanSe r = mean_se(reg);
        const MeanSe u = mean_se(unreg);
        const MeanSe a = mean_se(aux);
        row.emp_reg = r.mean;
        row.se_reg = r.se;
        row.emp_unreg = u.mean;
        row.se_unreg = u.se;
        row.emp_aux = a.mean;
        row.se_aux = a.se;
        row.emp_root = mean_se(root).mean;
        row.max_identity_gap = *std::max_element(identity_gap.begin(), identity_gap.end());
        row.max_decomposition_gap = *std::max_element(decomposition_gap.begin(), decomposition_gap.end());
        rows.push_back(row);
    }
    return rows;
}

std::string theorem1_csv(const std::vector<Theorem1Row>& rows) {
    std::ostringstream os;
    os << "beta,L,emp_reg,emp_unreg,bound_reg,bound_unreg,se_reg,se_unreg\n";
    for (const auto& r : rows) {
        os << csv::format_double(r.beta) << ',' << r.children << ',' << csv::format_double(r.emp_reg) << ','
           << csv::format_double(r.emp_unreg) << ',' << csv::format_double(r.bound_reg) << ','
           << csv::format_double(r.bound_unreg) << ',' << csv::format_double(r.se_reg) << ','
           << csv::format_double(r.se_unreg) << '\n';
    }
    return os.str();
}

Lemma1Result lemma1_experiment(const Lemma1Options& o) {
    Lemma1Result result;
    InstanceOptions io;
    io.steps = o.steps;
    io.dictionary = o.dictionary;
    io.rank = o.rank;
    io.children = o.children;
    io.sigma = o.sigma;
    for (std::size_t t = 0; t < o.trials; ++t) {
        std::optional<TheoryInstance> inst;
        AssumptionReport report;
        Lemma1Trial trial;
        for (std::size_t a = 0; a < o.max_attempts && !inst; ++a) {
            trial.attempts = a + 1;
            TheoryInstance candidate = generate_instance(io, trial_rng(o.seed, t, 100 + a)());
            report = check_assumptions(candidate);
            if (report.gamma > o.min_gamma && report.c_min > o.min_c_min) {
                inst = std::move(candidate);
            }
        }
        if (!inst) {
            ++result.skipped;
            continue;
        }
        trial.gamma = report.gamma;
        trial.c_min = report.c_min;
        trial.lambda = report.lambda_lower;
        trial.threshold = report.signal_threshold;
        std::mt19937_64 rng = trial_rng(o.seed, t, 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Eigen::VectorXd theta0(static_cast<Eigen::Index>(o.rank));
        for (Eigen::Index k = 0; k < theta0.size(); ++k) {
            const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
            theta0(k) = sign * o.signal_margin * trial.threshold * (1.0 + unit(rng));
        }
        set_root_params(*inst, theta0);
        resample_noise(*inst, rng);
        trial.theta_min = theta0.cwiseAbs().minCoeff();
        const SupportEstimate est = alg1_basis_recovery(*inst, trial.lambda);
        trial.converged = est.lasso.converged;
        std::vector<std::size_t> fp, fn;
        std::set_difference(est.support.begin(), est.support.end(), inst->support.begin(), inst->support.end(),
                            std::back_inserter(fp));
        std::set_difference(inst->support.begin(), inst->support.end(), est.support.begin(), est.support.end(),
                            std::back_inserter(fn));
        trial.false_positives = fp.size();
        trial.false_negatives = fn.size();
        trial.recovered = fp.empty() && fn.empty();
        if (trial.recovered) {
            ++result.recovered;
        }
        result.trials.push_back(trial);
    }
    return result;
}

std::string lemma1_csv(const Lemma1Result& result) {
    std::ostringstream os;
    os << "trial,attempts,gamma,c_min,lambda,threshold,theta_min,false_pos,false_neg,converged,recovered\n";
    for (std::size_t i = 0; i < result.trials.size(); ++i) {
        const auto& t = result.trials[i];
        os << i << ',' << t.attempts << ',' << csv::format_double(t.gamma) << ',' << csv::format_double(t.c_min)
           << ',' << csv::format_double(t.lambda) << ',' << csv::format_double(t.threshold) << ','
           << csv::format_double(t.theta_min) << ',' << t.false_positives << ',' << t.false_negatives << ','
           << (t.converged ? 1 : 0) << ',' << (t.recovered ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace hired::theory
