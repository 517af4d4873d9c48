#include "relax/linalg.hpp"

#include <cmath>
#include <string>

namespace relax {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return derive_seed(derive_seed(seed, a, b), c);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw config_error("matmul: dimension mismatch (" + std::to_string(a.rows) + "x" +
                           std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                           std::to_string(b.cols) + ")");
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                s += a(i, k) * b(k, j);
            }
            out(i, j) = s;
        }
    }
    return out;
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size()) {
        throw config_error("matvec: matrix has " + std::to_string(m.cols) +
                           " cols, vector has " + std::to_string(v.size()));
    }
    Vector out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        double s = 0.0;
        for (std::size_t k = 0; k < m.cols; ++k) {
            s += row[k] * v.data[k];
        }
        out[i] = s;
    }
    return out;
}

Vector matvec_transpose(const Matrix& m, const Vector& v) {
    if (m.rows != v.size()) {
        throw config_error("matvec_transpose: matrix has " + std::to_string(m.rows) +
                           " rows, vector has " + std::to_string(v.size()));
    }
    Vector out(m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        const double vi = v.data[i];
        for (std::size_t j = 0; j < m.cols; ++j) {
            out[j] += row[j] * vi;
        }
    }
    return out;
}

void add_outer(Matrix& m, const Vector& u, const Vector& v, double scale) {
    if (m.rows != u.size() || m.cols != v.size()) {
        throw config_error("add_outer: shape mismatch");
    }
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row_ptr(i);
        const double ui = scale * u.data[i];
        for (std::size_t j = 0; j < m.cols; ++j) {
            row[j] += ui * v.data[j];
        }
    }
}

void add_scaled(Vector& dst, const Vector& src, double scale) {
    if (dst.size() != src.size()) {
        throw config_error("add_scaled: length mismatch");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += scale * src[i];
    }
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw config_error("dot: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

Vector hadamard(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw config_error("hadamard: length mismatch");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    return out;
}

Vector relu(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] > 0.0 ? v[i] : 0.0;
    }
    return out;
}

Vector relu_mask(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] > 0.0 ? 1.0 : 0.0;
    }
    return out;
}

Vector softmax(const Vector& z) {
    Vector out(z.size());
    if (z.size() == 0) return out;
    double m = z[0];
    for (std::size_t i = 1; i < z.size(); ++i) {
        if (z[i] > m) m = z[i];
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] /= sum;
    }
    return out;
}

Vector draw_uniform(Rng& rng, double lo, double hi, std::size_t n) {
    if (!(lo < hi)) {
        throw config_error("draw_uniform: need lo < hi");
    }
    Vector out(n);
    const double span = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lo + span * rng.next_double();
    }
    return out;
}

Vector draw_gaussian(Rng& rng, double mean, double std_dev, std::size_t n) {
    if (std_dev < 0.0) {
        throw config_error("draw_gaussian: need std_dev >= 0");
    }
    Vector out(n);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (std::size_t i = 0; i < n; i += 2) {
        // u1 in (0, 1] keeps the log finite.
        const double u1 = 1.0 - rng.next_double();
        const double u2 = rng.next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        out[i] = mean + std_dev * (r * std::cos(two_pi * u2));
        if (i + 1 < n) {
            out[i + 1] = mean + std_dev * (r * std::sin(two_pi * u2));
        }
    }
    return out;
}

Vector draw_bernoulli(Rng& rng, double keep_prob, std::size_t n) {
    if (keep_prob < 0.0 || keep_prob > 1.0) {
        throw config_error("draw_bernoulli: keep_prob must lie in [0, 1]");
    }
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = rng.next_double() < keep_prob ? 1.0 : 0.0;
    }
    return out;
}

} // namespace relax
