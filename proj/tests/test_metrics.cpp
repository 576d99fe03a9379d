#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "milgrade/errors.hpp"
#include "milgrade/metrics.hpp"
#include "milgrade/rng.hpp"

using namespace milgrade;

namespace {

// Brute-force reference written directly from the definitions, independent
// of the ConfusionMatrix plumbing.
struct Reference {
    std::vector<double> f1;
    double weighted_f1 = 0.0;
    double kappa = 0.0;
};

Reference reference_metrics(const std::vector<int>& y, const std::vector<int>& p,
                            std::size_t k) {
    Reference ref;
    const double n = static_cast<double>(y.size());
    ref.f1.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        double tp = 0, fp = 0, fn = 0, support = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const bool truth = y[i] == static_cast<int>(c);
            const bool pred = p[i] == static_cast<int>(c);
            if (truth) ++support;
            if (truth && pred) ++tp;
            if (!truth && pred) ++fp;
            if (truth && !pred) ++fn;
        }
        if (support == 0) {
            ref.f1[c] = std::numeric_limits<double>::quiet_NaN();
        } else if (2 * tp + fp + fn == 0) {
            ref.f1[c] = 0.0;
        } else {
            ref.f1[c] = 2 * tp / (2 * tp + fp + fn);
        }
        if (support > 0) ref.weighted_f1 += support / n * ref.f1[c];
    }
    double agree = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == p[i]) ++agree;
    }
    const double po = agree / n;
    double pe = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double row = 0, col = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == static_cast<int>(c)) ++row;
            if (p[i] == static_cast<int>(c)) ++col;
        }
        pe += (row / n) * (col / n);
    }
    ref.kappa = pe >= 1.0 ? 1.0 : (po - pe) / (1.0 - pe);
    return ref;
}

} // namespace

TEST_CASE("confusion counting") {
    ConfusionMatrix cm = confusion({0, 1}, {0, 1}, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.at(0, 1) == 0);

    cm = confusion({0, 0, 1, 1}, {0, 1, 0, 1}, 2);
    for (std::size_t t = 0; t < 2; ++t) {
        for (std::size_t p = 0; p < 2; ++p) CHECK(cm.at(t, p) == 1);
    }
    CHECK(cm.total() == 4);

    CHECK_THROWS_AS(confusion({0, 2}, {0, 0}, 2), ContractError);
    CHECK_THROWS_AS(confusion({}, {}, 2), ContractError);
}

TEST_CASE("per-class F1 hand examples") {
    ConfusionMatrix diag(3);
    diag.at(0, 0) = 4;
    diag.at(1, 1) = 2;
    diag.at(2, 2) = 9;
    for (double f : per_class_f1(diag)) CHECK(f == 1.0);

    ConfusionMatrix cm(2);
    cm.at(0, 0) = 1;
    cm.at(0, 1) = 1;
    cm.at(1, 0) = 1;
    cm.at(1, 1) = 2;
    const std::vector<double> f1 = per_class_f1(cm);
    CHECK(f1[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f1[1] == doctest::Approx(2.0 * 2 / (4 + 1 + 1)).epsilon(1e-12));

    // Class never predicted but present: F1 = 0. Absent class: NaN.
    ConfusionMatrix never(3);
    never.at(0, 1) = 2; // class 0 exists, never predicted
    never.at(1, 1) = 1;
    const std::vector<double> f2 = per_class_f1(never);
    CHECK(f2[0] == 0.0);
    CHECK(std::isnan(f2[2]));
}

TEST_CASE("weighted F1 hand examples") {
    const ConfusionMatrix cm = confusion({0, 0, 1, 1, 1}, {0, 1, 1, 1, 0}, 2);
    CHECK(weighted_f1(cm) == doctest::Approx(0.6).epsilon(1e-12));

    const ConfusionMatrix perfect = confusion({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
    CHECK(weighted_f1(perfect) == doctest::Approx(1.0).epsilon(1e-12));

    // All-one-class predictions on a balanced 2-class set.
    const ConfusionMatrix lazy = confusion({0, 0, 1, 1}, {0, 0, 0, 0}, 2);
    CHECK(weighted_f1(lazy) == doctest::Approx(0.5 * (2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("kappa hand examples") {
    const ConfusionMatrix perfect = confusion({0, 1, 1, 2}, {0, 1, 1, 2}, 3);
    CHECK(cohen_kappa(perfect) == doctest::Approx(1.0).epsilon(1e-12));

    const ConfusionMatrix chance = confusion({0, 0, 1, 1}, {0, 1, 0, 1}, 2);
    CHECK(cohen_kappa(chance) == doctest::Approx(0.0).epsilon(1e-12));

    const ConfusionMatrix cm = confusion({0, 0, 1, 1, 1}, {0, 1, 1, 1, 0}, 2);
    CHECK(cohen_kappa(cm) == doctest::Approx((0.6 - 0.52) / 0.48).epsilon(1e-12));

    // Degenerate single-cell matrix.
    ConfusionMatrix single(2);
    single.at(1, 1) = 10;
    CHECK(cohen_kappa(single) == 1.0);
}

TEST_CASE("fold summary") {
    const Summary s = fold_summary({0.7, 0.8});
    CHECK(s.mean == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.stddev == doctest::Approx(0.070711).epsilon(1e-5));

    const Summary five = fold_summary({0.7, 0.8, 0.75, 0.72, 0.78});
    CHECK(five.mean == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(five.stddev == doctest::Approx(0.0412).epsilon(1e-3));

    const Summary flat = fold_summary({0.5, 0.5, 0.5});
    CHECK(flat.stddev == 0.0);

    const Summary perm = fold_summary({0.78, 0.7, 0.72, 0.8, 0.75});
    CHECK(perm.mean == doctest::Approx(five.mean).epsilon(1e-15));
    CHECK(perm.stddev == doctest::Approx(five.stddev).epsilon(1e-15));

    CHECK_THROWS_AS(fold_summary({0.5}), ContractError);
}

TEST_CASE("metrics match the brute-force reference on random pairs") {
    Rng rng(12345);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(2, 6));
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 60));
        std::vector<int> y(n);
        std::vector<int> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
            p[i] = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
        }
        const ConfusionMatrix cm = confusion(y, p, k);
        const Reference ref = reference_metrics(y, p, k);
        CHECK(std::abs(weighted_f1(cm) - ref.weighted_f1) < 1e-12);
        CHECK(std::abs(cohen_kappa(cm) - ref.kappa) < 1e-12);
        const std::vector<double> f1 = per_class_f1(cm);
        for (std::size_t c = 0; c < k; ++c) {
            if (std::isnan(ref.f1[c])) {
                CHECK(std::isnan(f1[c]));
            } else {
                CHECK(std::abs(f1[c] - ref.f1[c]) < 1e-12);
            }
        }
        CHECK(cohen_kappa(cm) <= 1.0);
    }
}

TEST_CASE("kappa and weighted F1 are invariant under class relabeling") {
    Rng rng(777);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = 4;
        const std::size_t n = 40;
        std::vector<int> y(n);
        std::vector<int> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.uniform_int(0, 3));
            p[i] = static_cast<int>(rng.uniform_int(0, 3));
        }
        std::vector<int> perm = {0, 1, 2, 3};
        rng.shuffle(perm);
        std::vector<int> y2(n);
        std::vector<int> p2(n);
        for (std::size_t i = 0; i < n; ++i) {
            y2[i] = perm[static_cast<std::size_t>(y[i])];
            p2[i] = perm[static_cast<std::size_t>(p[i])];
        }
        const ConfusionMatrix a = confusion(y, p, k);
        const ConfusionMatrix b = confusion(y2, p2, k);
        CHECK(cohen_kappa(a) == doctest::Approx(cohen_kappa(b)).epsilon(1e-12));
        CHECK(weighted_f1(a) == doctest::Approx(weighted_f1(b)).epsilon(1e-12));
    }
}

TEST_CASE("weighted F1 equals accuracy on diagonal matrices") {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 5;
    cm.at(1, 1) = 2;
    cm.at(2, 2) = 7;
    CHECK(weighted_f1(cm) == doctest::Approx(1.0).epsilon(1e-12));
    const double wf1 = weighted_f1(cm);
    CHECK(wf1 >= 0.0);
    CHECK(wf1 <= 1.0);
}
