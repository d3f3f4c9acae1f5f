#pragma once

#include <cstring>

#include <Eigen/Dense>

#include "aniadapter/rng.hpp"

namespace aniadapter {

// All numerics run in double precision; surrogate scale makes this cheap and
// keeps oracle comparisons tight.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = scale * rng.normal();
    return m;
}

// Random matrix with orthonormal columns scaled by `scale` (requires rows >= cols).
inline Mat random_orthonormal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Mat g = random_matrix(rng, rows, cols);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(rows, cols);
    return scale * q;
}

// Numerically stable row-wise softmax.
inline Mat softmax_rows(const Mat& s) {
    Mat p(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        double mx = s.row(i).maxCoeff();
        Eigen::ArrayXd e = (s.row(i).array() - mx).exp();
        p.row(i) = (e / e.sum()).matrix();
    }
    return p;
}

// Content hash over the exact byte representation; used by freeze audits.
inline uint64_t hash_matrix(const Mat& m) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(uint64_t(m.rows()));
    mix(uint64_t(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        uint64_t bits;
        double v = m.data()[i];
        static_assert(sizeof bits == sizeof v);
        std::memcpy(&bits, &v, sizeof bits);
        mix(bits);
    }
    return h;
}

}  // namespace aniadapter
