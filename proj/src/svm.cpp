#include "pedattr/svm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <list>
#include <sstream>

namespace pedattr {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(C > 0)) throw Error("C must be positive");
  if (!(kkt_tol > 0)) throw Error("kkt_tol must be positive");
  if (!(calib_eps > 0 && calib_eps < 0.5)) throw Error("calib_eps must lie in (0, 0.5)");
  if (max_passes == 0) throw Error("max_passes must be positive");
}

double intersection_kernel(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error("intersection_kernel: dimension mismatch (" + std::to_string(u.size()) +
                " vs " + std::to_string(v.size()) + ")");
  }
  // Four fixed accumulators: independent chains, same summation order every call.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t n = u.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += std::min(u[i], v[i]);
    s1 += std::min(u[i + 1], v[i + 1]);
    s2 += std::min(u[i + 2], v[i + 2]);
    s3 += std::min(u[i + 3], v[i + 3]);
  }
  for (; i < n; ++i) s0 += std::min(u[i], v[i]);
  return (s0 + s1) + (s2 + s3);
}

double intersection_kernel(const FeatureVector& u, const FeatureVector& v) {
  return intersection_kernel(std::span<const double>(u.values),
                             std::span<const double>(v.values));
}

namespace {

constexpr double kTau = 1e-12;

/// Dense Gram matrix rows.
class DenseRows {
 public:
  DenseRows(std::span<const double> gram, std::size_t n) : gram_(gram), n_(n) {}
  std::size_t size() const { return n_; }
  const double* row(std::size_t i) { return gram_.data() + i * n_; }
  double diag(std::size_t i) const { return gram_[i * n_ + i]; }

 private:
  std::span<const double> gram_;
  std::size_t n_;
};

/// Intersection-kernel rows computed on demand, least-recently-used eviction.
class CachedRows {
 public:
  CachedRows(const std::vector<FeatureVector>& x, std::size_t cache_mb)
      : x_(x), n_(x.size()), slot_of_(n_, kNone), diag_(n_) {
    const std::size_t row_bytes = std::max<std::size_t>(1, n_ * sizeof(double));
    capacity_ = std::clamp<std::size_t>(cache_mb * (std::size_t{1} << 20) / row_bytes,
                                        2, std::max<std::size_t>(n_, 2));
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = intersection_kernel(x_[i], x_[i]);
  }

  std::size_t size() const { return n_; }
  double diag(std::size_t i) const { return diag_[i]; }

  const double* row(std::size_t i) {
    if (slot_of_[i] != kNone) {
      auto& entry = slots_[slot_of_[i]];
      lru_.splice(lru_.begin(), lru_, entry.pos);
      return entry.data.data();
    }
    std::size_t slot;
    if (slots_.size() < capacity_) {
      slot = slots_.size();
      slots_.push_back({std::vector<double>(n_), {}, 0});
    } else {
      slot = lru_.back();
      lru_.pop_back();
      slot_of_[slots_[slot].owner] = kNone;
    }
    Slot& s = slots_[slot];
    s.owner = i;
    for (std::size_t j = 0; j < n_; ++j) s.data[j] = intersection_kernel(x_[i], x_[j]);
    lru_.push_front(slot);
    s.pos = lru_.begin();
    slot_of_[i] = slot;
    return s.data.data();
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  struct Slot {
    std::vector<double> data;
    std::list<std::size_t>::iterator pos;
    std::size_t owner;
  };
  const std::vector<FeatureVector>& x_;
  std::size_t n_;
  std::size_t capacity_ = 2;
  std::vector<std::size_t> slot_of_;
  std::vector<double> diag_;
  std::vector<Slot> slots_;
  std::list<std::size_t> lru_;
};

bool in_up(int y, double a, double C) { return (y > 0 && a < C) || (y < 0 && a > 0); }
bool in_low(int y, double a, double C) { return (y < 0 && a < C) || (y > 0 && a > 0); }

struct SmoResult {
  SvmDual dual;
  std::vector<double> grad;
};

template <typename Rows>
SmoResult run_smo(Rows& rows, std::span<const int> y, double C, double tol,
                  std::size_t max_iterations) {
  const std::size_t n = rows.size();
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  std::size_t iter = 0;
  double gap = 0.0;

  while (true) {
    // maximal violating pair; ties go to the smallest index
    std::size_t i = n, j = n;
    double m = -std::numeric_limits<double>::infinity();
    double M = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(y[t], alpha[t], C) && v > m) { m = v; i = t; }
      if (in_low(y[t], alpha[t], C) && v < M) { M = v; j = t; }
    }
    gap = (i == n || j == n) ? 0.0 : m - M;
    if (gap < tol) break;
    if (iter >= max_iterations) {
      throw ConvergenceError("SMO did not converge: " + std::to_string(iter) +
                                 " iterations, violating-pair gap " + std::to_string(gap) +
                                 " > kkt_tol " + std::to_string(tol),
                             iter, gap);
    }
    ++iter;

    const double* Ki = rows.row(i);
    const double* Kj = rows.row(j);
    const double Kij = Ki[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    double& ai = alpha[i];
    double& aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = rows.diag(i) + rows.diag(j) + 2.0 * Kij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > C) { ai = C; aj = C - diff; }
      } else {
        if (aj > C) { aj = C; ai = C + diff; }
      }
    } else {
      double quad = rows.diag(i) + rows.diag(j) - 2.0 * Kij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) { ai = C; aj = sum - C; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > C) {
        if (aj > C) { aj = C; ai = sum - C; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }
    const double dai = (ai - old_ai) * y[i];
    const double daj = (aj - old_aj) * y[j];
    // Ki stays valid: the cache holds at least two rows and i is most recent.
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (Ki[t] * dai + Kj[t] * daj);
    }
  }

  // bias from free vectors, else midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? free_sum / n_free : (ub + lb) / 2;

  SmoResult out;
  out.dual.alpha = std::move(alpha);
  out.dual.bias = -rho;
  out.dual.iterations = iter;
  out.dual.gap = gap;
  out.grad = std::move(grad);
  return out;
}

void check_labels(std::span<const int> y, std::size_t n) {
  if (y.size() != n) throw Error("label count does not match sample count");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw Error("SVM labels must be +1 or -1");
  }
  if (!pos || !neg) throw Error("SVM training needs both classes (single-class input)");
}

}  // namespace

SvmDual solve_svm_dual(std::span<const double> gram, std::span<const int> y, double C,
                       double tol, std::size_t max_iterations) {
  const std::size_t n = y.size();
  if (gram.size() != n * n) throw Error("Gram matrix size does not match labels");
  if (!(C > 0)) throw Error("C must be positive");
  check_labels(y, n);
  DenseRows rows(gram, n);
  return run_smo(rows, y, C, tol, max_iterations).dual;
}

double kkt_gap(std::span<const double> gram, std::span<const int> y,
               std::span<const double> alpha, double C) {
  const std::size_t n = y.size();
  double m = -std::numeric_limits<double>::infinity();
  double M = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    double g = -1.0;
    for (std::size_t s = 0; s < n; ++s) g += y[t] * y[s] * gram[t * n + s] * alpha[s];
    const double v = -y[t] * g;
    if (in_up(y[t], alpha[t], C)) m = std::max(m, v);
    if (in_low(y[t], alpha[t], C)) M = std::min(M, v);
  }
  if (!std::isfinite(m) || !std::isfinite(M)) return 0.0;
  return m - M;
}

PlattParams fit_platt(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("fit_platt: size mismatch");
  std::size_t n1 = 0, n0 = 0;
  for (int l : labels) {
    if (l == 1) ++n1;
    else if (l == 0) ++n0;
    else throw Error("fit_platt: labels must be 0/1");
  }
  if (n1 == 0 || n0 == 0) throw Error("fit_platt: calibration needs both classes");

  const double hi = (n1 + 1.0) / (n1 + 2.0);
  const double lo = 1.0 / (n0 + 2.0);
  const std::size_t n = scores.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == 1 ? hi : lo;

  auto objective = [&](double A, double B) {
    double f = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = scores[i] * A + B;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z))
                  : (t[i] - 1) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  double A = 0.0;
  double B = std::log((n0 + 1.0) / (n1 + 1.0));
  double fval = objective(A, B);
  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10, kSigma = 1e-12, kEps = 1e-5;
  for (int it = 0; it < kMaxIter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = scores[i] * A + B;
      double p, q;
      if (z >= 0) {
        const double e = std::exp(-z);
        p = e / (1 + e);
        q = 1 / (1 + e);
      } else {
        const double e = std::exp(z);
        p = 1 / (1 + e);
        q = e / (1 + e);
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= kMinStep) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step /= 2;
    }
    if (step < kMinStep) break;
  }
  return {A, B};
}

double UnaryModel::decision(std::span<const double> u) const {
  if (u.size() != dim) {
    throw Error("model '" + attribute + "' expects dim " + std::to_string(dim) + ", got " +
                std::to_string(u.size()));
  }
  double f = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i) {
    f += dual_coefs[i] * intersection_kernel(support_vectors[i], u);
  }
  return f;
}

double probability_from_score(const UnaryModel& model, double score) {
  const double z = model.calib_A * score + model.calib_B;
  const double p = z >= 0 ? std::exp(-z) / (1 + std::exp(-z)) : 1 / (1 + std::exp(z));
  return std::clamp(p, model.calib_eps, 1.0 - model.calib_eps);
}

double predict_proba(const UnaryModel& model, const FeatureVector& u) {
  return probability_from_score(model, model.decision(u.values));
}

UnaryModel train_iksvm(const std::vector<FeatureVector>& features,
                       std::span<const int> labels, const TrainConfig& cfg,
                       std::string attribute) {
  cfg.validate();
  const std::size_t n = features.size();
  if (n == 0) throw Error("train_iksvm: no training samples");
  if (labels.size() != n) throw Error("train_iksvm: label count mismatch");
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("train_iksvm: labels must be 0/1");
    y[i] = labels[i] == 1 ? 1 : -1;
  }
  check_labels(y, n);
  const std::size_t dim = features.front().dim();
  for (const auto& f : features) {
    if (f.dim() != dim) throw Error("train_iksvm: feature dimensions differ");
  }

  CachedRows rows(features, cfg.cache_mb);
  SmoResult res = run_smo(rows, y, cfg.C, cfg.kkt_tol, cfg.max_passes * n);

  UnaryModel model;
  model.attribute = std::move(attribute);
  model.dim = dim;
  model.bias = res.dual.bias;
  model.calib_eps = cfg.calib_eps;
  for (std::size_t i = 0; i < n; ++i) {
    if (res.dual.alpha[i] > 0) {
      model.support_vectors.push_back(features[i].values);
      model.dual_coefs.push_back(res.dual.alpha[i] * y[i]);
    }
  }
  // f(x_i) = y_i (grad_i + 1) + bias
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = y[i] * (res.grad[i] + 1.0) + model.bias;
  const PlattParams p = fit_platt(scores, labels);
  model.calib_A = p.A;
  model.calib_B = p.B;
  return model;
}

void calibrate(UnaryModel& model, const std::vector<FeatureVector>& features,
               std::span<const int> labels) {
  if (features.size() != labels.size()) throw Error("calibrate: size mismatch");
  std::vector<double> scores(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) scores[i] = model.decision(features[i].values);
  const PlattParams p = fit_platt(scores, labels);
  model.calib_A = p.A;
  model.calib_B = p.B;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

double get_double(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw Error(std::string("model file: missing ") + what);
  double v;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error(std::string("model file: bad number for ") + what);
  }
  return v;
}

void expect(std::istream& in, const std::string& key) {
  std::string tok;
  if (!(in >> tok) || tok != key) throw Error("model file: expected '" + key + "'");
}

}  // namespace

void save_unary_model(const fs::path& path, const UnaryModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model " + path.string());
  out << "pedattr-unary v1\n";
  out << "attribute " << model.attribute << '\n';
  out << "dim " << model.dim << '\n';
  out << "bias ";
  put(out, model.bias);
  out << "\ncalibration ";
  put(out, model.calib_A);
  out << ' ';
  put(out, model.calib_B);
  out << ' ';
  put(out, model.calib_eps);
  out << "\nsupport_vectors " << model.support_vectors.size() << '\n';
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    put(out, model.dual_coefs[i]);
    for (double v : model.support_vectors[i]) {
      out << ' ';
      put(out, v);
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

UnaryModel load_unary_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "pedattr-unary" || version != "v1") {
    throw Error("not a pedattr-unary v1 file: " + path.string());
  }
  UnaryModel m;
  expect(in, "attribute");
  in >> m.attribute;
  expect(in, "dim");
  in >> m.dim;
  expect(in, "bias");
  m.bias = get_double(in, "bias");
  expect(in, "calibration");
  m.calib_A = get_double(in, "calib_A");
  m.calib_B = get_double(in, "calib_B");
  m.calib_eps = get_double(in, "calib_eps");
  expect(in, "support_vectors");
  std::size_t count = 0;
  if (!(in >> count)) throw Error("model file: bad support vector count");
  m.support_vectors.resize(count);
  m.dual_coefs.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.dual_coefs[i] = get_double(in, "coefficient");
    m.support_vectors[i].resize(m.dim);
    for (std::size_t d = 0; d < m.dim; ++d) m.support_vectors[i][d] = get_double(in, "value");
  }
  return m;
}

}  // namespace pedattr
