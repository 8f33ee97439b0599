#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace minerwatch {

enum class Kernel { rbf, poly, sigmoid, linear };

std::string to_string(Kernel k);
Kernel parse_kernel(const std::string& s);

struct SVMParams {
  Kernel kernel = Kernel::rbf;
  double C = 1.0;
  std::optional<double> gamma;  // nullopt = "auto" = 1 / n_features
  int degree = 3;
  double coef0 = 0.0;
  std::uint64_t random_state = 10;
  double tolerance = 1e-3;
  long max_iterations = 1'000'000;

  bool operator==(const SVMParams&) const = default;
};

std::string describe(const SVMParams& p);

/// Soft-margin binary classifier from the dual, labels +1 / -1.
struct BinarySvm {
  Eigen::MatrixXd support_vectors;  // rows
  Eigen::VectorXd coef;             // y_i * alpha_i per support vector
  double rho = 0.0;                 // decision = sum coef_i K(sv_i, x) - rho
  bool converged = true;
  long iterations = 0;
  double max_kkt_violation = 0.0;
};

struct SmoTrace {
  std::vector<double> dual_objective;  // sum(alpha) - 1/2 alpha' Q alpha, per iteration
};

/// Solves the dual by sequential minimal optimization with second-order
/// working-set selection. Stops when the maximal KKT violation drops below
/// the tolerance or after max_iterations (then converged = false).
BinarySvm fit_binary_svm(const SVMParams& params, double gamma, const Eigen::Ref<const Eigen::MatrixXd>& x,
                         std::span<const int> signs, SmoTrace* trace = nullptr);

double kernel_value(const SVMParams& params, double gamma, const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b);

/// Multi-class SVM by one-vs-one voting (ties to the lowest class index).
class SvmModel {
public:
  struct Pair {
    int positive;
    int negative;
    BinarySvm svm;
  };

  SvmModel() = default;
  SvmModel(SVMParams params, double gamma, int n_classes, std::vector<Pair> pairs);

  static SvmModel fit(const SVMParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                      int n_classes);

  Eigen::VectorXi predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  /// n x n_classes fraction of pairwise votes won.
  Eigen::MatrixXd vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  const SVMParams& params() const { return params_; }
  double gamma() const { return gamma_; }
  int n_classes() const { return n_classes_; }
  const std::vector<Pair>& pairs() const { return pairs_; }
  bool converged() const;

private:
  SVMParams params_;
  double gamma_ = 1.0;
  int n_classes_ = 0;
  std::vector<Pair> pairs_;
};

}  // namespace minerwatch
