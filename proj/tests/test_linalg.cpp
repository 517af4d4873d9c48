#include <doctest.h>

#include <cmath>

#include "relax/linalg.hpp"
#include "reference_models.hpp"

using namespace relax;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = 2.0 * rng.next_double() - 1.0;
    return m;
}

} // namespace

TEST_CASE("matmul: identity times B returns B") {
    Rng rng(7);
    Matrix b = random_matrix(3, 3, rng);
    Matrix eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
    Matrix out = matmul(eye, b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(out.data[i] == b.data[i]);
}

TEST_CASE("matmul: hand-computed 2x2 by 2x1") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    Matrix b(2, 1);
    b(0, 0) = 1; b(1, 0) = 1;
    Matrix out = matmul(a, b);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(1, 0) == 7.0);
}

TEST_CASE("matmul: equals the naive triple-loop oracle elementwise") {
    Rng rng(11);
    Matrix a = random_matrix(5, 7, rng);
    Matrix b = random_matrix(7, 3, rng);
    Matrix got = matmul(a, b);
    Matrix want = testing::naive_matmul(a, b);
    REQUIRE(got.rows == want.rows);
    REQUIRE(got.cols == want.cols);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data[i] == want.data[i]);
}

TEST_CASE("matmul: dimension mismatch is a configuration error") {
    Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), config_error);
}

TEST_CASE("matmul: associativity within 1e-9 relative error") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        Matrix a = random_matrix(4, 6, rng);
        Matrix b = random_matrix(6, 5, rng);
        Matrix c = random_matrix(5, 3, rng);
        Matrix left = matmul(matmul(a, b), c);
        Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            const double denom = std::max({std::fabs(left.data[i]), std::fabs(right.data[i]), 1.0});
            CHECK(std::fabs(left.data[i] - right.data[i]) / denom <= 1e-9);
        }
    }
}

TEST_CASE("matvec transpose agrees with explicit transposition") {
    Rng rng(13);
    Matrix m = random_matrix(4, 6, rng);
    Vector v = draw_uniform(rng, -1, 1, 4);
    Matrix mt(6, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) mt(j, i) = m(i, j);
    Vector got = matvec_transpose(m, v);
    Vector want = matvec(mt, v);
    for (std::size_t i = 0; i < 6; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("relu and relu_mask") {
    Vector v(std::vector<double>{-1.0, 0.0, 2.0});
    Vector r = relu(v);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);
    Vector m = relu_mask(v);
    CHECK(m[0] == 0.0);
    CHECK(m[1] == 0.0); // derivative at exactly 0 is 0
    CHECK(m[2] == 1.0);

    Vector pos(std::vector<double>{0.5, 1.0, 3.25});
    Vector rp = relu(pos);
    for (std::size_t i = 0; i < pos.size(); ++i) CHECK(rp[i] == pos[i]);
}

TEST_CASE("softmax: symmetric, stable, matches the direct formula") {
    Vector z3(3, 0.0);
    Vector s3 = softmax(z3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s3[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Vector big(std::vector<double>{1000.0, 0.0});
    Vector sb = softmax(big);
    CHECK(sb[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sb[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isfinite(sb[0]));

    Rng rng(3);
    Vector z = draw_uniform(rng, -2, 2, 7);
    Vector got = softmax(z);
    // Direct exp/sum oracle, safe at small magnitudes.
    double sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += std::exp(z[i]);
    double total = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::fabs(got[i] - std::exp(z[i]) / sum) <= 1e-12);
        total += got[i];
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
}

TEST_CASE("softmax: invariant under constant shifts") {
    Rng rng(5);
    Vector z = draw_uniform(rng, -3, 3, 9);
    Vector base = softmax(z);
    for (double c : {-100.0, -1.0, 0.5, 42.0}) {
        Vector shifted = z;
        for (std::size_t i = 0; i < z.size(); ++i) shifted[i] += c;
        Vector s = softmax(shifted);
        for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::fabs(s[i] - base[i]) <= 1e-12);
    }
}

TEST_CASE("rng: pure function of seed and call order") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42), d(43);
    bool all_equal = true;
    for (int i = 0; i < 10; ++i) {
        if (c.next_u64() != d.next_u64()) all_equal = false;
    }
    CHECK_FALSE(all_equal);
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(7, 1, 2, 3) == derive_seed(7, 1, 2, 3));
}

TEST_CASE("draw_uniform: range, mean, and validation") {
    Rng rng(21);
    const double a = 0.75;
    const std::size_t n = 100000;
    Vector v = draw_uniform(rng, -a, a, n);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(v[i] >= -a);
        CHECK(v[i] < a);
        mean += v[i];
    }
    mean /= static_cast<double>(n);
    CHECK(std::fabs(mean) <= 3.0 * a / std::sqrt(3.0 * static_cast<double>(n)));

    CHECK_THROWS_AS(draw_uniform(rng, 1.0, 1.0, 4), config_error);
    CHECK_THROWS_AS(draw_uniform(rng, 2.0, -2.0, 4), config_error);
}

TEST_CASE("draw_gaussian: zero std collapses to the mean") {
    Rng rng(9);
    Vector v = draw_gaussian(rng, 0.0, 0.0, 17);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == 0.0);

    Rng r2(9);
    Vector w = draw_gaussian(r2, 1.5, 0.0, 5);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == 1.5);

    CHECK_THROWS_AS(draw_gaussian(rng, 0.0, -1.0, 4), config_error);
}

TEST_CASE("draw_gaussian: sample statistics") {
    Rng rng(33);
    const std::size_t n = 200000;
    Vector v = draw_gaussian(rng, 0.0, 1.0, n);
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += v[i];
        sq += v[i] * v[i];
    }
    mean /= static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("draw_bernoulli: keep probability 1 gives all ones") {
    Rng rng(55);
    Vector v = draw_bernoulli(rng, 1.0, 1000);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == 1.0);
    CHECK_THROWS_AS(draw_bernoulli(rng, 1.5, 4), config_error);
}

TEST_CASE("rng-backed draws replay under the same seed") {
    Rng a(101), b(101);
    Vector ga = draw_gaussian(a, 0, 1, 64);
    Vector gb = draw_gaussian(b, 0, 1, 64);
    for (std::size_t i = 0; i < 64; ++i) CHECK(ga[i] == gb[i]);
    Vector ba = draw_bernoulli(a, 0.3, 64);
    Vector bb = draw_bernoulli(b, 0.3, 64);
    for (std::size_t i = 0; i < 64; ++i) CHECK(ba[i] == bb[i]);
}
