#include "minerwatch/svm.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "minerwatch/error.hpp"
#include "minerwatch/parallel.hpp"

namespace minerwatch {

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::rbf: return "rbf";
    case Kernel::poly: return "poly";
    case Kernel::sigmoid: return "sigmoid";
    case Kernel::linear: return "linear";
  }
  return "?";
}

Kernel parse_kernel(const std::string& s) {
  if (s == "rbf") return Kernel::rbf;
  if (s == "poly") return Kernel::poly;
  if (s == "sigmoid") return Kernel::sigmoid;
  if (s == "linear") return Kernel::linear;
  throw Error(ErrorKind::invalid_argument, "unknown kernel '" + s + "'");
}

std::string describe(const SVMParams& p) {
  std::ostringstream out;
  out << "kernel=" << to_string(p.kernel) << " C=" << p.C << " gamma=";
  if (p.gamma) {
    out << *p.gamma;
  } else {
    out << "auto";
  }
  if (p.kernel == Kernel::poly) out << " degree=" << p.degree;
  return out.str();
}

double kernel_value(const SVMParams& params, double gamma, const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) {
  switch (params.kernel) {
    case Kernel::rbf: return std::exp(-gamma * (a - b).squaredNorm());
    case Kernel::poly: return std::pow(gamma * a.dot(b) + params.coef0, params.degree);
    case Kernel::sigmoid: return std::tanh(gamma * a.dot(b) + params.coef0);
    case Kernel::linear: return a.dot(b);
  }
  return 0.0;
}

namespace {

constexpr double kTau = 1e-12;

Eigen::MatrixXd gram(const SVMParams& params, double gamma, const Eigen::Ref<const Eigen::MatrixXd>& a,
                     const Eigen::Ref<const Eigen::MatrixXd>& b) {
  Eigen::MatrixXd dots = a * b.transpose();
  switch (params.kernel) {
    case Kernel::rbf: {
      const Eigen::VectorXd na = a.rowwise().squaredNorm();
      const Eigen::VectorXd nb = b.rowwise().squaredNorm();
      Eigen::MatrixXd d2 = (-2.0 * dots).colwise() + na;
      d2.rowwise() += nb.transpose();
      return (-gamma * d2.cwiseMax(0.0)).array().exp();
    }
    case Kernel::poly: return (gamma * dots.array() + params.coef0).pow(params.degree);
    case Kernel::sigmoid: return (gamma * dots.array() + params.coef0).tanh();
    case Kernel::linear: return dots;
  }
  return dots;
}

}  // namespace

BinarySvm fit_binary_svm(const SVMParams& params, double gamma, const Eigen::Ref<const Eigen::MatrixXd>& x,
                         std::span<const int> signs, SmoTrace* trace) {
  const auto n = static_cast<Eigen::Index>(signs.size());
  if (n != x.rows()) throw Error(ErrorKind::invalid_argument, "label count does not match rows");
  if (!(params.C > 0)) throw Error(ErrorKind::invalid_argument, "C must be positive");

  const double C = params.C;
  const Eigen::MatrixXd K = gram(params, gamma, x, x);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = signs[static_cast<std::size_t>(i)] > 0 ? 1.0 : -1.0;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
  const Eigen::VectorXd QD = K.diagonal();
  const auto Q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * K(i, j); };
  const auto upper = [&](Eigen::Index t) { return alpha[t] >= C; };
  const auto lower = [&](Eigen::Index t) { return alpha[t] <= 0; };

  BinarySvm out;
  out.converged = false;
  long iter = 0;
  double violation = std::numeric_limits<double>::infinity();

  for (; iter < params.max_iterations; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          i = t;
        }
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t];
        i = t;
      }
    }

    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double grad_diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
        if (grad_diff > 0 && i >= 0) {
          double quad = QD[i] + QD[t] - 2.0 * y[i] * Q(i, t);
          const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
          if (obj <= best_obj) {
            best_obj = obj;
            j = t;
          }
        }
      } else {
        if (upper(t)) continue;
        const double grad_diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
        if (grad_diff > 0 && i >= 0) {
          double quad = QD[i] + QD[t] + 2.0 * y[i] * Q(i, t);
          const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
          if (obj <= best_obj) {
            best_obj = obj;
            j = t;
          }
        }
      }
    }

    violation = gmax + gmax2;
    if (violation < params.tolerance || j < 0 || i < 0) {
      out.converged = true;
      break;
    }

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = QD[i] + QD[j] + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = QD[i] + QD[j] - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (Eigen::Index t = 0; t < n; ++t) G[t] += Q(i, t) * dai + Q(j, t) * daj;

    if (trace) trace->dual_objective.push_back(-0.5 * alpha.dot(G - Eigen::VectorXd::Ones(n)));
  }

  // Offset from free support vectors, midpoint of the feasible range otherwise.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  out.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  if (!std::isfinite(out.rho)) out.rho = 0.0;

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0) sv.push_back(t);
  }
  out.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  out.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    out.support_vectors.row(static_cast<Eigen::Index>(k)) = x.row(sv[k]);
    out.coef[static_cast<Eigen::Index>(k)] = y[sv[k]] * alpha[sv[k]];
  }
  out.iterations = iter;
  out.max_kkt_violation = violation;
  return out;
}

SvmModel::SvmModel(SVMParams params, double gamma, int n_classes, std::vector<Pair> pairs)
    : params_(params), gamma_(gamma), n_classes_(n_classes), pairs_(std::move(pairs)) {}

SvmModel SvmModel::fit(const SVMParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                       int n_classes) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorKind::invalid_argument, "feature rows and labels differ in length");
  }
  std::set<int> present;
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw Error(ErrorKind::invalid_argument, "label out of range");
    present.insert(label);
  }
  if (present.size() < 2) throw Error(ErrorKind::training, "svm needs at least 2 classes");

  const double gamma = params.gamma.value_or(1.0 / static_cast<double>(x.cols()));
  std::vector<std::pair<int, int>> combos;
  for (auto a = present.begin(); a != present.end(); ++a) {
    for (auto b = std::next(a); b != present.end(); ++b) combos.emplace_back(*a, *b);
  }

  std::vector<Pair> pairs(combos.size());
  parallel_for(combos.size(), [&](std::size_t p) {
    const auto [a, b] = combos[p];
    std::vector<Eigen::Index> rows;
    std::vector<int> signs;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == a || y[i] == b) {
        rows.push_back(static_cast<Eigen::Index>(i));
        signs.push_back(y[i] == a ? 1 : -1);
      }
    }
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    pairs[p] = Pair{a, b, fit_binary_svm(params, gamma, sub, signs)};
  });
  return SvmModel(params, gamma, n_classes, std::move(pairs));
}

Eigen::MatrixXd SvmModel::vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(x.rows(), n_classes_);
  for (const auto& pair : pairs_) {
    const Eigen::VectorXd decision =
        gram(params_, gamma_, x, pair.svm.support_vectors) * pair.svm.coef - Eigen::VectorXd::Constant(x.rows(), pair.svm.rho);
    for (Eigen::Index r = 0; r < x.rows(); ++r) votes(r, decision[r] > 0 ? pair.positive : pair.negative) += 1.0;
  }
  if (!pairs_.empty()) votes /= static_cast<double>(pairs_.size());
  return votes;
}

Eigen::VectorXi SvmModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  const Eigen::MatrixXd votes = vote_fractions(x);
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    votes.row(r).maxCoeff(&best);
    out[r] = static_cast<int>(best);
  }
  return out;
}

bool SvmModel::converged() const {
  for (const auto& p : pairs_) {
    if (!p.svm.converged) return false;
  }
  return true;
}

}  // namespace minerwatch
