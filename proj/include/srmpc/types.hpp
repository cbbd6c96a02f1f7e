#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace srmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Evaluation produced non-finite values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// G_uu lost positive definiteness during a backward sweep.
class RegularityError : public std::runtime_error {
public:
    RegularityError(int stage, const std::string& msg)
        : std::runtime_error(msg), stage_(stage) {}
    int stage() const { return stage_; }

private:
    int stage_;
};

/// A simulated or rolled-out state left the finite range.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int stage, const std::string& msg)
        : std::runtime_error(msg), stage_(stage) {}
    int stage() const { return stage_; }

private:
    int stage_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Largest |eigenvalue| of a symmetric matrix.
double spectral_norm_sym(const Mat& m);
// Largest singular value of a general matrix.
double spectral_norm(const Mat& m);
double min_eigenvalue_sym(const Mat& m);

// Pseudo-inverse of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues below 1e-12 * max(1, ||m||_2) are treated as zero.
Mat pinv_psd(const Mat& m);

// Order-fixed compensated accumulation (Neumaier variant); used wherever a
// reproducible sum is part of a contract.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace srmpc
