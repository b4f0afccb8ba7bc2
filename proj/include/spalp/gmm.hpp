#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spalp/errors.hpp"
#include "spalp/random.hpp"

namespace spalp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Smallest eigenvalue any fitted covariance is allowed to have. Curriculum
// ALP data is frequently degenerate (many identical points), so flooring is
// part of the M-step rather than an error path.
inline constexpr double kCovarianceFloor = 1e-6;

struct GaussianComponent {
  double weight = 0.0;
  Vector mean;
  Matrix covariance;
};

// Clamps the eigenvalues of a symmetric matrix to at least `floor`. For a
// fixed floor this is the exact constrained covariance MLE, which keeps the
// EM log-likelihood monotone even on degenerate data. A Gershgorin bound
// skips the eigendecomposition whenever it already proves the floor holds.
inline Matrix floor_covariance(Matrix cov, double floor = kCovarianceFloor) {
  cov = 0.5 * (cov + cov.transpose()).eval();
  double gershgorin = std::numeric_limits<double>::infinity();
  for (long i = 0; i < cov.rows(); ++i) {
    const double radius = cov.row(i).cwiseAbs().sum() - std::abs(cov(i, i));
    gershgorin = std::min(gershgorin, cov(i, i) - radius);
  }
  if (gershgorin >= floor) return cov;
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  if (cov.rows() == 2 || cov.rows() == 3) {
    es.computeDirect(cov);  // closed-form path for the common small dims
  } else {
    es.compute(cov);
  }
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("floor_covariance: eigendecomposition failed");
  }
  if (es.eigenvalues().minCoeff() >= floor) return cov;
  const Vector clamped = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

class GaussianMixture {
 public:
  GaussianMixture(std::vector<GaussianComponent> components, int dim)
      : components_(std::move(components)), dim_(dim) {
    if (dim_ < 1) throw std::invalid_argument("GaussianMixture: dim must be positive");
    if (components_.empty()) {
      throw std::invalid_argument("GaussianMixture: needs at least one component");
    }
    double weight_sum = 0.0;
    for (const auto& c : components_) {
      if (c.mean.size() != dim_ || c.covariance.rows() != dim_ || c.covariance.cols() != dim_) {
        throw std::invalid_argument("GaussianMixture: component dimension mismatch");
      }
      if (!(c.weight > 0.0 && c.weight <= 1.0)) {
        throw std::invalid_argument("GaussianMixture: component weight outside (0, 1]");
      }
      if (!c.covariance.isApprox(c.covariance.transpose(), 1e-9)) {
        throw std::invalid_argument("GaussianMixture: covariance not symmetric");
      }
      weight_sum += c.weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
      throw std::invalid_argument("GaussianMixture: weights sum to " +
                                  std::to_string(weight_sum) + ", expected 1");
    }
  }

  const std::vector<GaussianComponent>& components() const { return components_; }
  int dim() const { return dim_; }
  int size() const { return static_cast<int>(components_.size()); }

 private:
  std::vector<GaussianComponent> components_;
  int dim_;
};

namespace detail {

// Cached Cholesky factor and log-normalizer of one component's density.
struct ComponentDensity {
  Eigen::LLT<Matrix> llt;
  double log_weight = 0.0;
  double log_norm = 0.0;
  Vector mean;

  double log_density(const Vector& x) const {
    const Vector y = llt.matrixL().solve(x - mean);
    return log_norm - 0.5 * y.squaredNorm();
  }
};

inline std::vector<ComponentDensity> prepare_densities(const GaussianMixture& mixture) {
  constexpr double log_two_pi = 1.8378770664093454836;
  std::vector<ComponentDensity> out;
  out.reserve(mixture.components().size());
  for (const auto& c : mixture.components()) {
    ComponentDensity d;
    d.llt.compute(c.covariance);
    if (d.llt.info() != Eigen::Success) {
      d.llt.compute(floor_covariance(c.covariance));
      if (d.llt.info() != Eigen::Success) {
        throw std::runtime_error("GaussianMixture: covariance not factorizable");
      }
    }
    double log_det = 0.0;
    for (int i = 0; i < c.covariance.rows(); ++i) {
      log_det += 2.0 * std::log(d.llt.matrixL()(i, i));
    }
    d.log_weight = std::log(c.weight);
    d.log_norm = -0.5 * (static_cast<double>(c.covariance.rows()) * log_two_pi + log_det);
    d.mean = c.mean;
    out.push_back(std::move(d));
  }
  return out;
}

inline void check_data(const std::vector<Vector>& data) {
  if (data.empty()) throw std::invalid_argument("gmm: empty data");
  const auto dim = data.front().size();
  if (dim < 1) throw std::invalid_argument("gmm: zero-dimensional data");
  for (const auto& x : data) {
    if (x.size() != dim) throw std::invalid_argument("gmm: data dimension mismatch");
  }
}

// k-means++ seeding: first center uniform, then each next center picked with
// probability proportional to squared distance from the chosen set.
inline std::vector<Vector> kmeanspp_centers(const std::vector<Vector>& data, int k, Rng& rng) {
  const std::size_t n = data.size();
  std::vector<Vector> centers;
  centers.reserve(k);
  centers.push_back(data[rng.uniform_index(n)]);
  std::vector<double> dist_sq(n, 0.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (data[i] - c).squaredNorm());
      dist_sq[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist_sq[i];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(n);  // all points coincide with a center
    }
    centers.push_back(data[pick]);
  }
  return centers;
}

inline Matrix scatter_around(const std::vector<Vector>& data, const Vector& mean) {
  Matrix s = Matrix::Zero(mean.size(), mean.size());
  for (const auto& x : data) {
    const Vector d = x - mean;
    s.noalias() += d * d.transpose();
  }
  return s / static_cast<double>(data.size());
}

}  // namespace detail

struct EmTrace {
  std::vector<double> loglik;  // one entry per E-pass, including the final parameters
  int iterations = 0;          // number of M-steps executed
};

inline double log_likelihood(const GaussianMixture& mixture, const std::vector<Vector>& data);

// EM from explicit initial means. Exposed so callers can pin initialization
// when studying fit behavior; fit_em derives its init from a seed.
inline GaussianMixture fit_em_with_init(const std::vector<Vector>& data,
                                        const std::vector<Vector>& initial_means,
                                        int max_iter = 100, EmTrace* trace = nullptr) {
  detail::check_data(data);
  const int k = static_cast<int>(initial_means.size());
  const long dim = data.front().size();
  const std::size_t n = data.size();
  if (k < 1) throw std::invalid_argument("fit_em: k must be at least 1");
  if (n < static_cast<std::size_t>(k)) {
    throw ModelTooLargeError("fit_em: " + std::to_string(k) + " components exceed " +
                             std::to_string(n) + " data points");
  }
  if (max_iter < 1) throw std::invalid_argument("fit_em: max_iter must be positive");
  for (const auto& c : initial_means) {
    if (c.size() != dim) throw std::invalid_argument("fit_em: init dimension mismatch");
  }

  // Row-major copy of the data; all E/M-step passes run batched on it.
  Matrix points(n, dim);
  for (std::size_t i = 0; i < n; ++i) points.row(i) = data[i].transpose();

  Vector global_mean = Vector::Zero(dim);
  for (const auto& x : data) global_mean += x;
  global_mean /= static_cast<double>(n);
  const Matrix global_cov = floor_covariance(detail::scatter_around(data, global_mean));

  // Hard-assignment init around the seeded centers.
  std::vector<int> assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const double d = (data[i] - initial_means[j]).squaredNorm();
      if (d < best) {
        best = d;
        assign[i] = j;
      }
    }
  }
  std::vector<GaussianComponent> comps(k);
  {
    std::vector<std::vector<Vector>> clusters(k);
    for (std::size_t i = 0; i < n; ++i) clusters[assign[i]].push_back(data[i]);
    double weight_sum = 0.0;
    for (int j = 0; j < k; ++j) {
      comps[j].weight = std::max<double>(static_cast<double>(clusters[j].size()), 1.0);
      weight_sum += comps[j].weight;
      if (clusters[j].empty()) {
        comps[j].mean = initial_means[j];
        comps[j].covariance = global_cov;
      } else {
        Vector m = Vector::Zero(dim);
        for (const auto& x : clusters[j]) m += x;
        m /= static_cast<double>(clusters[j].size());
        comps[j].mean = m;
        comps[j].covariance = floor_covariance(detail::scatter_around(clusters[j], m));
      }
    }
    for (auto& c : comps) c.weight /= weight_sum;
  }

  GaussianMixture mixture(comps, static_cast<int>(dim));
  if (trace) *trace = EmTrace{};

  constexpr double log_two_pi = 1.8378770664093454836;
  constexpr double rel_tol = 1e-6;
  constexpr double empty_mass = 1e-10;
  double prev_ll = -std::numeric_limits<double>::infinity();
  Matrix log_resp(n, k);
  Matrix work(dim, n);
  Matrix centered(n, dim);
  Matrix weighted(n, dim);
  Vector point_log_density(n);

  for (int iter = 0;; ++iter) {
    // E-step, batched per component: log w_j + logN_j(x_i) for all i at once.
    for (int j = 0; j < k; ++j) {
      const auto& c = mixture.components()[j];
      Eigen::LLT<Matrix> llt(c.covariance);
      if (llt.info() != Eigen::Success) {
        llt.compute(floor_covariance(c.covariance));
        if (llt.info() != Eigen::Success) {
          throw std::runtime_error("fit_em: covariance not factorizable");
        }
      }
      double log_det = 0.0;
      for (long r = 0; r < dim; ++r) log_det += 2.0 * std::log(llt.matrixL()(r, r));
      const double log_norm_w =
          std::log(c.weight) - 0.5 * (static_cast<double>(dim) * log_two_pi + log_det);
      work = (points.rowwise() - c.mean.transpose()).transpose();
      llt.matrixL().solveInPlace(work);
      log_resp.col(j) =
          (-0.5 * work.colwise().squaredNorm().transpose().array() + log_norm_w).matrix();
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double max_term = log_resp.row(i).maxCoeff();
      double sum = 0.0;
      for (int j = 0; j < k; ++j) sum += std::exp(log_resp(i, j) - max_term);
      const double log_sum = max_term + std::log(sum);
      point_log_density(i) = log_sum;
      log_resp.row(i).array() -= log_sum;
      ll += log_sum;
    }
    if (trace) trace->loglik.push_back(ll);

    if (iter >= max_iter) break;
    if (iter > 0 && std::abs(ll - prev_ll) <= rel_tol * std::max(1.0, std::abs(prev_ll))) break;
    prev_ll = ll;

    // M-step; log_resp now holds responsibilities.
    log_resp = log_resp.array().exp().matrix();
    std::vector<GaussianComponent> next(k);
    for (int j = 0; j < k; ++j) {
      const double nj = log_resp.col(j).sum();
      if (nj < empty_mass) {
        // Starved component: re-seed at the least explained data point.
        long worst = 0;
        point_log_density.minCoeff(&worst);
        next[j].weight = 1.0 / static_cast<double>(n);
        next[j].mean = points.row(worst).transpose();
        next[j].covariance = global_cov;
        continue;
      }
      next[j].weight = nj / static_cast<double>(n);
      const Vector m = (log_resp.col(j).transpose() * points).transpose() / nj;
      centered = points.rowwise() - m.transpose();
      weighted = centered.array().colwise() * log_resp.col(j).array();
      const Matrix s = centered.transpose() * weighted / nj;
      next[j].mean = m;
      next[j].covariance = floor_covariance(s);
    }
    double weight_sum = 0.0;
    for (const auto& c : next) weight_sum += c.weight;
    for (auto& c : next) c.weight /= weight_sum;
    mixture = GaussianMixture(std::move(next), static_cast<int>(dim));
    if (trace) trace->iterations = iter + 1;
  }
  return mixture;
}

// Fits a k-component full-covariance mixture by EM with k-means++-style
// seeding from `seed`. `restarts` independent runs keep the best final
// log-likelihood; the default single run stays fully deterministic per seed.
inline GaussianMixture fit_em(const std::vector<Vector>& data, int k, std::uint64_t seed,
                              int max_iter = 100, EmTrace* trace = nullptr, int restarts = 1) {
  detail::check_data(data);
  if (k < 1) throw std::invalid_argument("fit_em: k must be at least 1");
  if (data.size() < static_cast<std::size_t>(k)) {
    throw ModelTooLargeError("fit_em: " + std::to_string(k) + " components exceed " +
                             std::to_string(data.size()) + " data points");
  }
  if (restarts < 1) throw std::invalid_argument("fit_em: restarts must be positive");

  double best_ll = -std::numeric_limits<double>::infinity();
  std::optional<GaussianMixture> best;
  EmTrace best_trace;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    const auto centers = detail::kmeanspp_centers(data, k, rng);
    EmTrace t;
    GaussianMixture m = fit_em_with_init(data, centers, max_iter, &t);
    const double ll = t.loglik.empty() ? log_likelihood(m, data) : t.loglik.back();
    if (!best || ll > best_ll) {
      best_ll = ll;
      best = std::move(m);
      best_trace = std::move(t);
    }
  }
  if (trace) *trace = std::move(best_trace);
  return *best;
}

// Sum over points of log sum_j w_j N(x; mu_j, Sigma_j), log-sum-exp stabilized.
inline double log_likelihood(const GaussianMixture& mixture, const std::vector<Vector>& data) {
  for (const auto& x : data) {
    if (x.size() != mixture.dim()) {
      throw std::invalid_argument("log_likelihood: data dimension mismatch");
    }
  }
  const auto densities = detail::prepare_densities(mixture);
  double total = 0.0;
  for (const auto& x : data) {
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(densities.size());
    for (std::size_t j = 0; j < densities.size(); ++j) {
      terms[j] = densities[j].log_weight + densities[j].log_density(x);
      max_term = std::max(max_term, terms[j]);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    total += max_term + std::log(sum);
  }
  return total;
}

// Free parameters of a k-component full-covariance mixture in `dim` dimensions.
inline int free_parameter_count(int k, int dim) {
  return (k - 1) + k * dim + k * dim * (dim + 1) / 2;
}

inline double aic(const GaussianMixture& mixture, const std::vector<Vector>& data) {
  const int p = free_parameter_count(mixture.size(), mixture.dim());
  return 2.0 * p - 2.0 * log_likelihood(mixture, data);
}

// Fits one mixture per k in [k_min, k_max] (truncated to the data size) and
// returns the AIC minimizer; exact ties resolve to the smaller k.
inline GaussianMixture select_and_fit(const std::vector<Vector>& data, int k_min, int k_max,
                                      std::uint64_t seed, int max_iter = 100,
                                      int* k_selected = nullptr, int restarts = 1) {
  detail::check_data(data);
  if (k_min < 1 || k_min > k_max) {
    throw std::invalid_argument("select_and_fit: need 1 <= k_min <= k_max");
  }
  const int n = static_cast<int>(data.size());
  const int hi = std::min(k_max, n);
  const int lo = std::min(k_min, hi);

  double best_aic = std::numeric_limits<double>::infinity();
  std::optional<GaussianMixture> best;
  int best_k = lo;
  for (int k = lo; k <= hi; ++k) {
    GaussianMixture m = fit_em(data, k, derive_seed(seed, static_cast<std::uint64_t>(k)),
                               max_iter, nullptr, restarts);
    const double a = aic(m, data);
    if (a < best_aic) {
      best_aic = a;
      best = std::move(m);
      best_k = k;
    }
  }
  if (k_selected) *k_selected = best_k;
  return *best;
}

// Draws from one component via the Cholesky factor of its covariance.
inline Vector sample_component(const GaussianMixture& mixture, int component_index, Rng& rng) {
  if (component_index < 0 || component_index >= mixture.size()) {
    throw std::invalid_argument("sample_component: index out of range");
  }
  const auto& c = mixture.components()[component_index];
  Eigen::LLT<Matrix> llt(c.covariance);
  if (llt.info() != Eigen::Success) llt.compute(floor_covariance(c.covariance));
  Vector z(mixture.dim());
  for (int i = 0; i < mixture.dim(); ++i) z(i) = rng.normal();
  return c.mean + Matrix(llt.matrixL()) * z;
}

}  // namespace spalp
