#include "kucb/gram.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "kucb/errors.hpp"

namespace kucb {

namespace {

// out = Sym(L) * rhs where only the lower triangle of the n x n leading
// block of buf is valid. rhs and out are n x M row-major. Columns are
// walked four at a time so each out/rhs row is touched once per four matrix
// columns; the dual accumulation covers the mirrored upper triangle, so the
// matrix itself streams through memory exactly once.
template <int M>
void sym_lower_product_fixed(const Eigen::MatrixXd& buf, Eigen::Index n,
                             const double* __restrict rhs_rm, double* __restrict out_rm) {
  constexpr Eigen::Index kCols = 4;
  const double* a = buf.data();
  const Eigen::Index lda = buf.outerStride();
  std::memset(out_rm, 0, sizeof(double) * static_cast<std::size_t>(n) * M);

  Eigen::Index c0 = 0;
  for (; c0 + kCols <= n; c0 += kCols) {
    const double* __restrict col0 = a + c0 * lda;
    const double* __restrict col1 = a + (c0 + 1) * lda;
    const double* __restrict col2 = a + (c0 + 2) * lda;
    const double* __restrict col3 = a + (c0 + 3) * lda;
    double s[kCols][M], acc[kCols][M];
    for (int q = 0; q < kCols; ++q)
      for (int j = 0; j < M; ++j) {
        s[q][j] = rhs_rm[(c0 + q) * M + j];
        acc[q][j] = 0.0;
      }
    // 4x4 triangle at the diagonal, scalar
    for (Eigen::Index c = c0; c < c0 + kCols; ++c) {
      const double* __restrict col = a + c * lda;
      double* __restrict orow_c = out_rm + c * M;
      const double diag = col[c];
      for (int j = 0; j < M; ++j) orow_c[j] += diag * rhs_rm[c * M + j];
      for (Eigen::Index r = c + 1; r < c0 + kCols; ++r) {
        const double v = col[r];
        double* __restrict orow = out_rm + r * M;
        const double* __restrict rrow = rhs_rm + r * M;
        for (int j = 0; j < M; ++j) {
          orow[j] += v * rhs_rm[c * M + j];
          acc[c - c0][j] += v * rrow[j];
        }
      }
    }
    // rows below the block: each row visited once for all four columns
    for (Eigen::Index r = c0 + kCols; r < n; ++r) {
      const double v0 = col0[r], v1 = col1[r], v2 = col2[r], v3 = col3[r];
      double* __restrict orow = out_rm + r * M;
      const double* __restrict rrow = rhs_rm + r * M;
      for (int j = 0; j < M; ++j) {
        orow[j] += v0 * s[0][j] + v1 * s[1][j] + v2 * s[2][j] + v3 * s[3][j];
        acc[0][j] += v0 * rrow[j];
        acc[1][j] += v1 * rrow[j];
        acc[2][j] += v2 * rrow[j];
        acc[3][j] += v3 * rrow[j];
      }
    }
    for (int q = 0; q < kCols; ++q) {
      double* __restrict orow = out_rm + (c0 + q) * M;
      for (int j = 0; j < M; ++j) orow[j] += acc[q][j];
    }
  }
  // remainder columns, scalar
  for (Eigen::Index c = c0; c < n; ++c) {
    const double* __restrict col = a + c * lda;
    const double* srow = rhs_rm + c * M;
    double acc[M];
    for (int j = 0; j < M; ++j) acc[j] = col[c] * srow[j];
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double v = col[r];
      double* __restrict orow = out_rm + r * M;
      const double* __restrict rrow = rhs_rm + r * M;
      for (int j = 0; j < M; ++j) {
        orow[j] += v * srow[j];
        acc[j] += v * rrow[j];
      }
    }
    double* orow_c = out_rm + c * M;
    for (int j = 0; j < M; ++j) orow_c[j] += acc[j];
  }
}

// Physical row width of the padded row-major rhs/out buffers: one cache
// line per row, vectorizes cleanly regardless of the live column count.
constexpr int kRowPad = 8;

void sym_lower_product_rm(const Eigen::MatrixXd& buf, Eigen::Index n, const double* rhs_rm,
                          double* out_rm, int m) {
  if (m == 1) return sym_lower_product_fixed<1>(buf, n, rhs_rm, out_rm);
  if (m == kRowPad) return sym_lower_product_fixed<kRowPad>(buf, n, rhs_rm, out_rm);
  throw NumericalError("sym_lower_product_rm: unsupported column count");
}

constexpr double kPivotFactor = 1e-12;

}  // namespace

GramState::GramState(double gamma, std::size_t recompute_every)
    : gamma_(gamma), recompute_every_(recompute_every) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ConfigError("gamma must be strictly positive and finite");
  if (recompute_every == 0) throw ConfigError("recompute_every must be positive");
}

void GramState::ensure_capacity(std::size_t n) {
  const auto needed = static_cast<Eigen::Index>(n);
  if (buf_.rows() >= needed) return;
  Eigen::Index cap = std::max<Eigen::Index>(16, buf_.rows() * 2);
  while (cap < needed) cap *= 2;
  Eigen::MatrixXd grown(cap, cap);
  const Eigen::Index old = std::min(buf_.rows(), static_cast<Eigen::Index>(size()));
  if (old > 0) grown.topLeftCorner(old, old) = buf_.topLeftCorner(old, old);
  buf_ = std::move(grown);
}

void GramState::apply_inverse(const double* x, double* out) const {
  sym_lower_product_rm(buf_, static_cast<Eigen::Index>(size()), x, out, 1);
}

Eigen::MatrixXd GramState::inverse() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd full(n, n);
  if (n > 0)
    full = buf_.topLeftCorner(n, n).selfadjointView<Eigen::Lower>();
  return full;
}

void GramState::push(const Context& x, double reward, const KernelSpec& kernel,
                     const Eigen::VectorXd* inv_k_hint) {
  if (!std::isfinite(reward)) throw ConfigError("reward must be finite");
  const double kxx = kernel.eval(x, x);
  const auto n = static_cast<Eigen::Index>(size());

  if (n == 0) {
    const double d = kxx + gamma_;
    if (d <= kPivotFactor * gamma_)
      throw NumericalError("numerical breakdown: first pivot " + std::to_string(d));
    ensure_capacity(1);
    buf_(0, 0) = 1.0 / d;
  } else {
    Eigen::VectorXd b = kernel.gram_vector(x, history_);
    Eigen::VectorXd ib(n);
    if (inv_k_hint != nullptr && inv_k_hint->size() == n) {
      ib = *inv_k_hint;
    } else {
      apply_inverse(b.data(), ib.data());
    }
    double d = kxx + gamma_ - b.dot(ib);
    if (d <= kPivotFactor * gamma_) {
      // A collapsed pivot means drift (or a barely-PSD precomputed kernel)
      // has overwhelmed the update; rebuild once and retry.
      dense_rebuild(kernel);
      apply_inverse(b.data(), ib.data());
      d = kxx + gamma_ - b.dot(ib);
      if (d <= kPivotFactor * gamma_)
        throw NumericalError("numerical breakdown: Schur pivot " + std::to_string(d) +
                             " after dense recompute (near-duplicate context?)");
    }
    ensure_capacity(static_cast<std::size_t>(n) + 1);
    const double inv_d = 1.0 / d;
    buf_.topLeftCorner(n, n).selfadjointView<Eigen::Lower>().rankUpdate(ib, inv_d);
    buf_.row(n).head(n) = (-inv_d) * ib.transpose();
    buf_(n, n) = inv_d;
  }

  history_.push_back(x);
  rewards_.push_back(reward);
  if (++steps_since_recompute_ >= recompute_every_) dense_rebuild(kernel);
}

double GramState::predict_mean(const Context& x, const KernelSpec& kernel) const {
  const auto n = static_cast<Eigen::Index>(size());
  if (n == 0) return 0.0;
  Eigen::VectorXd alpha(n);
  apply_inverse(rewards_.data(), alpha.data());
  return kernel.gram_vector(x, history_).dot(alpha);
}

double GramState::width(const Context& x, const KernelSpec& kernel) const {
  const double kxx = kernel.eval(x, x);
  const auto n = static_cast<Eigen::Index>(size());
  if (n == 0) return std::sqrt(kxx / gamma_);
  Eigen::VectorXd k = kernel.gram_vector(x, history_);
  Eigen::VectorXd v(n);
  apply_inverse(k.data(), v.data());
  return std::sqrt(std::max(0.0, kxx - k.dot(v)) / gamma_);
}

void GramState::batch_scores(const KernelSpec& kernel, const std::vector<Context>& queries,
                             Eigen::VectorXd& mu, Eigen::VectorXd& sigma,
                             Eigen::MatrixXd* inv_k_columns) const {
  const auto nq = static_cast<int>(queries.size());
  const auto n = static_cast<Eigen::Index>(size());
  mu.resize(nq);
  sigma.resize(nq);
  if (inv_k_columns != nullptr) inv_k_columns->resize(n, nq);
  if (n == 0) {
    for (int a = 0; a < nq; ++a) {
      mu[a] = 0.0;
      sigma[a] = std::sqrt(kernel.eval(queries[a], queries[a]) / gamma_);
    }
    return;
  }
  // inv*[y | k_1 ... k_m] in one streaming pass per chunk of queries; rows
  // are padded to a full cache line. The first chunk carries the reward
  // column so alpha = inv*y comes for free.
  Eigen::VectorXd alpha(n);
  Eigen::ArrayXd rhs_rm, out_rm;
  int done = 0;
  bool first = true;
  while (first || done < nq) {
    const int take = std::min(nq - done, first ? kRowPad - 1 : kRowPad);
    const int cols = kRowPad;
    rhs_rm.setZero(n * cols);
    out_rm.resize(n * cols);
    for (Eigen::Index r = 0; r < n; ++r) {
      double* row = rhs_rm.data() + r * cols;
      int j = 0;
      if (first) row[j++] = rewards_[static_cast<std::size_t>(r)];
      for (int q = 0; q < take; ++q)
        row[j + q] = kernel.eval(queries[static_cast<std::size_t>(done + q)],
                                 history_[static_cast<std::size_t>(r)]);
    }
    sym_lower_product_rm(buf_, n, rhs_rm.data(), out_rm.data(), cols);

    const int base = first ? 1 : 0;
    if (first)
      for (Eigen::Index r = 0; r < n; ++r) alpha[r] = out_rm[r * cols];
    for (int q = 0; q < take; ++q) {
      double dot_mu = 0.0, dot_w = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const double* row = rhs_rm.data() + r * cols;
        const double* orow = out_rm.data() + r * cols;
        dot_mu += row[base + q] * alpha[r];
        dot_w += row[base + q] * orow[base + q];
      }
      const int a = done + q;
      const double kxx = kernel.eval(queries[static_cast<std::size_t>(a)],
                                     queries[static_cast<std::size_t>(a)]);
      mu[a] = dot_mu;
      sigma[a] = std::sqrt(std::max(0.0, kxx - dot_w) / gamma_);
      if (inv_k_columns != nullptr)
        for (Eigen::Index r = 0; r < n; ++r)
          (*inv_k_columns)(r, a) = out_rm[r * cols + base + q];
    }
    done += take;
    first = false;
  }
}

void GramState::dense_rebuild(const KernelSpec& kernel) {
  steps_since_recompute_ = 0;
  const auto n = static_cast<Eigen::Index>(size());
  if (n == 0) return;
  Eigen::MatrixXd reg = kernel.gram_matrix(history_);
  reg.diagonal().array() += gamma_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("dense factorization of (K + gamma I) failed");
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  ensure_capacity(static_cast<std::size_t>(n));
  buf_.topLeftCorner(n, n) = 0.5 * (inv + inv.transpose());
}

nlohmann::json context_to_json(const Context& c) {
  nlohmann::json j;
  if (c.has_features()) {
    j["features"] = std::vector<double>(c.features().data(), c.features().data() + c.features().size());
  } else {
    j["id"] = c.id();
  }
  return j;
}

Context context_from_json(const nlohmann::json& j) {
  if (j.contains("id")) return Context::from_id(j.at("id").get<std::size_t>());
  const auto vals = j.at("features").get<std::vector<double>>();
  Eigen::VectorXd f(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) f[static_cast<Eigen::Index>(i)] = vals[i];
  return Context::from_features(std::move(f));
}

nlohmann::json GramState::checkpoint() const {
  nlohmann::json j;
  j["gamma"] = gamma_;
  j["recompute_every"] = recompute_every_;
  nlohmann::json hist = nlohmann::json::array();
  for (const Context& c : history_) hist.push_back(context_to_json(c));
  j["history"] = std::move(hist);
  j["rewards"] = rewards_;
  return j;
}

GramState GramState::restore(const nlohmann::json& j, const KernelSpec& kernel) {
  GramState s(j.at("gamma").get<double>(), j.value("recompute_every", std::size_t{512}));
  for (const auto& cj : j.at("history")) s.history_.push_back(context_from_json(cj));
  s.rewards_ = j.at("rewards").get<std::vector<double>>();
  if (s.rewards_.size() != s.history_.size())
    throw ConfigError("checkpoint rewards/history length mismatch");
  s.dense_rebuild(kernel);
  return s;
}

}  // namespace kucb
