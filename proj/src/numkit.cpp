#include "gpsdrf/numkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace gpsdrf {

double rcond_sym(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  double lmax = ev.cwiseAbs().maxCoeff();
  if (lmax == 0.0) return 0.0;
  return ev.minCoeff() / lmax;  // negative if not PD
}

Mat solve_spd(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw std::invalid_argument("solve_spd: dimension mismatch");
  Mat s = 0.5 * (a + a.transpose());
  double rc = rcond_sym(s);
  if (!(rc >= kMinRcond)) throw SingularMatrix(rc);
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) throw SingularMatrix(rc);
  Mat x = llt.solve(b);
  x += llt.solve(b - s * x);  // one refinement step
  return x;
}

Vec solve_spd(const Mat& a, const Vec& b) {
  Mat x = solve_spd(a, Mat(b));
  return x.col(0);
}

double normal_pdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw NonPositiveVariance(variance);
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  double d = x - mean;
  return inv_sqrt_2pi / std::sqrt(variance) * std::exp(-0.5 * d * d / variance);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

std::vector<double> quantiles(const std::vector<double>& values,
                              const std::vector<double>& probs) {
  if (values.empty()) throw EmptyInput("values");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0))
      throw std::invalid_argument("quantiles: prob outside [0,1]");
    if (i > 0 && probs[i] < probs[i - 1])
      throw std::invalid_argument("quantiles: probs not sorted");
  }
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double h = static_cast<double>(n - 1) * probs[i];
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo >= n - 1) {
      out[i] = sorted[n - 1];
    } else {
      double frac = h - static_cast<double>(lo);
      out[i] = sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    }
  }
  return out;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& word : state_) {
    x += kGolden;
    word = mix64(x);
  }
  if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0)
    state_[0] = kGolden;
}

static inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl64(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl64(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Mat mvn_sample(Rng& rng, const Vec& mean, const Mat& cov, Eigen::Index count) {
  const Eigen::Index dim = mean.size();
  if (cov.rows() != dim || cov.cols() != dim)
    throw std::invalid_argument("mvn_sample: dimension mismatch");
  Eigen::LLT<Mat> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) throw SingularMatrix(rcond_sym(cov), "covariance");
  Mat l = llt.matrixL();
  Mat draws(count, dim);
  Vec z(dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) z[j] = rng.normal();
    draws.row(i) = (mean + l * z).transpose();
  }
  return draws;
}

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  std::size_t workers = threads < 1 ? 1 : static_cast<std::size_t>(threads);
  workers = std::min(workers, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gpsdrf
