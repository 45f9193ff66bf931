#include <doctest.h>

#include <cmath>

#include "btseg/bt_core.hpp"
#include "btseg/errors.hpp"
#include "btseg/reference.hpp"
#include "btseg/rng.hpp"

using namespace btseg;
using bt::LossWeights;

namespace {

Tensor random_matrix(Rng& rng, std::size_t b, std::size_t p, double scale = 2.0,
                     double offset = 0.0) {
    Tensor t({b, p});
    for (auto& v : t.vec()) v = offset + scale * rng.normal();
    return t;
}

// Orthogonal unit-variance design: col1 = [1,1,-1,-1], col2 = [1,-1,1,-1].
Tensor orthogonal_design() {
    return Tensor({4, 2}, {1, 1, 1, -1, -1, 1, -1, -1});
}

}  // namespace

TEST_CASE("batch_normalize: two-point column maps to [-1, 1]") {
    const Tensor z({2, 1}, {1.0, 3.0});
    const Tensor out = bt::batch_normalize(z, 1e-12);
    CHECK(out.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(out.at(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("batch_normalize: constant column is damped to zero") {
    const Tensor z({3, 1}, {5.0, 5.0, 5.0});
    const Tensor out = bt::batch_normalize(z, 1e-5);
    for (double v : out.vec()) CHECK(v == 0.0);
}

TEST_CASE("batch_normalize: matches the scalar-loop oracle") {
    const Tensor z({4, 1}, {1.0, 2.0, 3.0, 10.0});
    const Tensor got = bt::batch_normalize(z, 1e-5);
    const Tensor want = ref::batch_normalize_loop(z, 1e-5);
    for (std::size_t i = 0; i < got.numel(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("batch_normalize: rejects singleton batches and non-finite input") {
    CHECK_THROWS_AS(bt::batch_normalize(Tensor({1, 2}, {1.0, 2.0}), 1e-5), ValueError);
    Tensor bad({2, 1}, {1.0, std::nan("")});
    CHECK_THROWS_AS(bt::batch_normalize(bad, 1e-5), ValueError);
    CHECK_THROWS_AS(bt::batch_normalize(Tensor({2, 1}, {0.0, 1.0}), 0.0), ValueError);
}

TEST_CASE("cross_correlation: decorrelated equal inputs give the identity") {
    const Tensor z = orthogonal_design();
    const auto c = bt::cross_correlation(z, z);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(c.values.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("cross_correlation: identical normalized columns give all-ones") {
    // Both columns linear in the row index normalize to the same vector.
    Tensor z({3, 2}, {1, 2, 3, 4, 5, 6});
    const Tensor n = bt::batch_normalize(z, 1e-12);
    const auto c = bt::cross_correlation(n, n);
    for (double v : c.values.vec()) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cross_correlation: matches the triple-loop oracle on seeded input") {
    Rng rng(17);
    const Tensor a = bt::batch_normalize(random_matrix(rng, 8, 4), 1e-5);
    const Tensor b = bt::batch_normalize(random_matrix(rng, 8, 4), 1e-5);
    const auto got = bt::cross_correlation(a, b);
    const Tensor want = ref::cross_correlation_loop(a, b);
    for (std::size_t i = 0; i < want.numel(); ++i)
        CHECK(got.values[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("cross_correlation: rejects shape mismatch") {
    Rng rng(3);
    const Tensor a = random_matrix(rng, 4, 3);
    const Tensor b = random_matrix(rng, 4, 2);
    CHECK_THROWS_AS(bt::cross_correlation(a, b), ValueError);
}

TEST_CASE("bt_loss: identity matrix has zero loss") {
    Tensor c({3, 3});
    for (std::size_t i = 0; i < 3; ++i) c.at(i, i) = 1.0;
    CHECK(bt::bt_loss(bt::CrossCorrelation{c}, 0.5) == 0.0);
}

TEST_CASE("bt_loss: all-ones 2x2 with lambda 1/2 gives 1") {
    const Tensor c({2, 2}, {1, 1, 1, 1});
    CHECK(bt::bt_loss(bt::CrossCorrelation{c}, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bt_loss: matches the double-loop oracle on a seeded matrix") {
    Rng rng(23);
    Tensor c({4, 4});
    for (auto& v : c.vec()) v = rng.uniform(-1.0, 1.0);
    CHECK(bt::bt_loss(bt::CrossCorrelation{c}, 0.25) ==
          doctest::Approx(ref::bt_loss_loop(c, 0.25)).epsilon(1e-12));
}

TEST_CASE("bt_loss: rejects non-square input") {
    CHECK_THROWS_AS(bt::bt_loss(bt::CrossCorrelation{Tensor({2, 3})}, 0.5), ValueError);
}

TEST_CASE("default_lambda: 1/p rule") {
    CHECK(bt::default_lambda(256) == 0.00390625);
    CHECK(bt::default_lambda(2) == 0.5);
    CHECK(bt::default_lambda(512) == 1.0 / 512.0);
    CHECK_THROWS_AS(bt::default_lambda(1), ValueError);
}

TEST_CASE("combined_loss: weighted sum with the 0.1 default balance") {
    CHECK(bt::combined_loss(2.0, 5.0, 0.1) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(bt::combined_loss(1.25, 9.0, 0.0) == 1.25);
    CHECK(bt::combined_loss(0.0, 3.0, 1.0) == 3.0);
    CHECK_THROWS_AS(bt::combined_loss(-1.0, 1.0, 0.1), ValueError);
}

TEST_CASE("bt_loss_from_raw: orthogonal self-pair has zero loss") {
    const Tensor z = orthogonal_design();
    LossWeights w;
    CHECK(bt::bt_loss_from_raw(z, z, w) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("bt_loss_from_raw: perfectly correlated columns give 1 at lambda 1/2") {
    const Tensor z({3, 2}, {1, 2, 3, 4, 5, 6});
    LossWeights w;
    w.lambda_bt = 0.5;
    w.epsilon = 1e-12;
    CHECK(bt::bt_loss_from_raw(z, z, w) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bt_loss_from_raw: matches the loop oracle on a seeded batch") {
    Rng rng(31);
    const Tensor z_a = random_matrix(rng, 32, 16, 1.7, 0.4);
    const Tensor z_b = random_matrix(rng, 32, 16, 1.3, -0.2);
    LossWeights w;
    const double got = bt::bt_loss_from_raw(z_a, z_b, w);
    const double want = ref::bt_loss_from_raw_loop(z_a, z_b, 1.0 / 16.0, w.epsilon);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("invariant: self-correlation diagonal is 1 for non-constant columns") {
    Rng rng(37);
    for (int rep = 0; rep < 10; ++rep) {
        const Tensor z = random_matrix(rng, 6, 5, 3.0, 1.0);
        const Tensor n = bt::batch_normalize(z, 1e-12);
        const auto c = bt::cross_correlation(n, n);
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(c.values.at(i, i) - 1.0) < 1e-6);
    }
}

TEST_CASE("invariant: positive per-dimension affine maps leave the loss unchanged") {
    Rng rng(43);
    const Tensor z_a = random_matrix(rng, 12, 6);
    const Tensor z_b = random_matrix(rng, 12, 6);
    LossWeights w;
    w.epsilon = 1e-12;
    const double base = bt::bt_loss_from_raw(z_a, z_b, w);

    Tensor scaled = z_a;
    for (std::size_t j = 0; j < 6; ++j) {
        const double a = rng.uniform(0.2, 4.0);
        const double c = rng.uniform(-3.0, 3.0);
        for (std::size_t k = 0; k < 12; ++k) scaled.at(k, j) = a * scaled.at(k, j) + c;
    }
    CHECK(bt::bt_loss_from_raw(scaled, z_b, w) == doctest::Approx(base).epsilon(1e-8));
}

TEST_CASE("invariant: joint batch permutation leaves the loss unchanged") {
    Rng rng(47);
    const std::size_t b = 10, p = 4;
    const Tensor z_a = random_matrix(rng, b, p);
    const Tensor z_b = random_matrix(rng, b, p);
    LossWeights w;
    const double base = bt::bt_loss_from_raw(z_a, z_b, w);

    std::vector<std::size_t> perm(b);
    for (std::size_t i = 0; i < b; ++i) perm[i] = i;
    for (std::size_t i = 0; i < b; ++i)
        std::swap(perm[i],
                  perm[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                static_cast<std::int64_t>(b) - 1))]);
    Tensor pa({b, p}), pb({b, p});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            pa.at(i, j) = z_a.at(perm[i], j);
            pb.at(i, j) = z_b.at(perm[i], j);
        }
    CHECK(bt::bt_loss_from_raw(pa, pb, w) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("invariant: swap symmetry") {
    Rng rng(53);
    const Tensor z_a = random_matrix(rng, 9, 7);
    const Tensor z_b = random_matrix(rng, 9, 7);
    LossWeights w;
    CHECK(bt::bt_loss_from_raw(z_a, z_b, w) ==
          doctest::Approx(bt::bt_loss_from_raw(z_b, z_a, w)).epsilon(1e-10));
}

TEST_CASE("invariant: nonnegativity on random cross-correlations") {
    Rng rng(59);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor c({5, 5});
        for (auto& v : c.vec()) v = rng.uniform(-1.0, 1.0);
        CHECK(bt::bt_loss(bt::CrossCorrelation{c}, 0.2) >= 0.0);
    }
}

TEST_CASE("invariant: analytic gradient matches central differences, step 1e-3") {
    Rng rng(61);
    Tensor z_a = random_matrix(rng, 8, 5, 1.5, 0.2);
    Tensor z_b = random_matrix(rng, 8, 5, 1.5, -0.3);
    LossWeights w;
    const auto grads = bt::bt_loss_backward(z_a, z_b, w);

    std::vector<double*> values;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < z_a.numel(); ++i) {
        values.push_back(&z_a[i]);
        analytic.push_back(grads.d_z_a[i]);
    }
    const auto loss = [&] { return bt::bt_loss_from_raw(z_a, z_b, w); };
    const auto report = ref::fd_compare(loss, values, analytic, 1e-3);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("collapse case: a constant column contributes the anti-collapse unit term") {
    // The constant column normalizes to zero, so its diagonal entry is 0 and
    // contributes (1-0)^2 = 1; the non-constant column is self-correlated.
    Tensor z({4, 2});
    for (std::size_t k = 0; k < 4; ++k) {
        z.at(k, 0) = 2.5;
        z.at(k, 1) = static_cast<double>(k);
    }
    LossWeights w;
    w.lambda_bt = 0.25;
    w.epsilon = 1e-12;
    CHECK(bt::bt_loss_from_raw(z, z, w) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cross-correlation entries stay within the correlation range") {
    Rng rng(67);
    const Tensor a = bt::batch_normalize(random_matrix(rng, 16, 6), 1e-5);
    const Tensor b = bt::batch_normalize(random_matrix(rng, 16, 6), 1e-5);
    const auto c = bt::cross_correlation(a, b);
    for (double v : c.values.vec()) {
        CHECK(v >= -1.0 - 1e-4);
        CHECK(v <= 1.0 + 1e-4);
    }
}
