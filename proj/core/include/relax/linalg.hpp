#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "relax/errors.hpp"

namespace relax {

/// Dense row-major matrix of doubles.
///
/// Every reduction in this module runs in a fixed, documented order
/// (ascending inner index), so results are bit-reproducible across runs
/// and identical seeds give bit-identical training trajectories.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

struct Vector {
    std::vector<double> data;

    Vector() = default;
    explicit Vector(std::size_t n, double v = 0.0) : data(n, v) {}
    explicit Vector(std::vector<double> d) : data(std::move(d)) {}

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// Deterministic 64-bit generator (SplitMix64, Steele et al. 2014).
/// The output stream is a pure function of (seed, call order); integer
/// and uniform draws are bit-identical on any platform. Gaussian draws
/// go through Box-Muller and inherit the platform's libm rounding in
/// the last ulp.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Modulo reduction; the bias is below
    /// 2^-40 for any n < 2^24, which covers every use in this project.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

/// Stable stream derivation: mixes a label into a seed so independent
/// consumers (shuffling, masks, augmentation, ...) never share a stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

// ---------------------------------------------------------------------------
// Matrix / vector arithmetic. Accumulation order: ascending k throughout.
// ---------------------------------------------------------------------------

/// a (m x k) times b (k x n). Throws config_error on dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// m (r x c) times v (c). out[i] = sum_k m(i,k) * v[k], k ascending.
Vector matvec(const Matrix& m, const Vector& v);

/// m^T (c x r) times v (r). out[j] accumulates over ascending i.
Vector matvec_transpose(const Matrix& m, const Vector& v);

/// m += scale * (u v^T). Used for gradient outer-product accumulation.
void add_outer(Matrix& m, const Vector& u, const Vector& v, double scale = 1.0);

void add_scaled(Vector& dst, const Vector& src, double scale = 1.0);
double dot(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);

Vector relu(const Vector& v);

/// 1 where v > 0, else 0. The derivative at exactly 0 is defined as 0.
Vector relu_mask(const Vector& v);

/// Numerically stable softmax (max subtraction). Output sums to 1.
Vector softmax(const Vector& z);

// ---------------------------------------------------------------------------
// Seeded draws. All are pure functions of (rng state, call order).
// ---------------------------------------------------------------------------

Vector draw_uniform(Rng& rng, double lo, double hi, std::size_t n);
Vector draw_gaussian(Rng& rng, double mean, double std_dev, std::size_t n);

/// Entries are 1 with probability keep_prob, else 0.
Vector draw_bernoulli(Rng& rng, double keep_prob, std::size_t n);

} // namespace relax
