#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "preckacz/numerics.hpp"
#include "preckacz/sampling.hpp"

namespace test_support {

inline Eigen::MatrixXd to_eigen(const preckacz::DenseMatrix& a) {
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    return out;
}

inline preckacz::DenseMatrix gaussian_matrix(std::size_t m, std::size_t n, preckacz::RngStream& rng) {
    preckacz::DenseMatrix a(m, n);
    for (double& v : a.data()) v = rng.normal();
    return a;
}

inline double max_abs_diff(const preckacz::DenseMatrix& a, const preckacz::DenseMatrix& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k)
        d = std::max(d, std::abs(a.data()[k] - b.data()[k]));
    return d;
}

/// Independent singular values from Eigen, ascending.
inline Eigen::VectorXd oracle_singular_values(const preckacz::DenseMatrix& a) {
    const Eigen::MatrixXd e = to_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
    Eigen::VectorXd s = svd.singularValues();
    return s.reverse();
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path(PRECKACZ_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test_support
