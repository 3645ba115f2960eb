#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fd.hpp"
#include "glowgs/error.hpp"
#include "glowgs/featbank.hpp"

using namespace glowgs;

namespace {

FeatureSet with_global(std::vector<double> g) {
    FeatureSet fs;
    fs.dim = static_cast<int>(g.size());
    fs.global = std::move(g);
    return fs;
}

FeatureBank random_bank(Rng& rng, std::size_t n, int dim) {
    FeatureBank b;
    b.dim = dim;
    b.extractor = "test";
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (std::size_t s = 0; s < n; ++s) {
        for (double& x : v) x = rng.uniform(-1, 1);
        b.append(static_cast<std::uint32_t>(s / 4), static_cast<std::uint32_t>(s % 4), v);
    }
    return b;
}

}  // namespace

TEST(Retrieve, ExactRecordIsFoundAtZero) {
    Rng rng(1);
    const FeatureBank b = random_bank(rng, 20, 17);
    const auto rec = b.record(7);
    const std::vector<double> q(rec.begin(), rec.end());
    const Match m = retrieve(b, q);
    EXPECT_EQ(m.index, 7u);
    EXPECT_EQ(m.distance, 0.0);
}

TEST(Retrieve, TiesGoToLowestIndex) {
    FeatureBank b;
    b.dim = 2;
    b.append(0, 0, std::vector<double>{3.0, 0.0});
    b.append(0, 1, std::vector<double>{1.0, 0.0});
    b.append(0, 2, std::vector<double>{-1.0, 0.0});
    b.append(0, 3, std::vector<double>{2.0, 0.0});
    const Match m = retrieve(b, std::vector<double>{0.0, 0.0});
    EXPECT_EQ(m.index, 1u);
    EXPECT_EQ(m.distance, 1.0);
    FeatureBank c;
    c.dim = 1;
    c.append(0, 0, std::vector<double>{1.0});
    c.append(0, 1, std::vector<double>{2.0});
    EXPECT_EQ(retrieve(c, std::vector<double>{0.0}).index, 0u);
}

TEST(Retrieve, MatchesBruteForceScan) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const int dim = 1 + static_cast<int>(rng.below(24));
        const FeatureBank b = random_bank(rng, 1 + rng.below(300), dim);
        std::vector<double> q(static_cast<std::size_t>(dim));
        for (double& x : q) x = rng.uniform(-1, 1);
        double best = std::numeric_limits<double>::infinity();
        std::size_t idx = 0;
        for (std::size_t s = 0; s < b.size(); ++s) {
            double d2 = 0;
            for (int i = 0; i < dim; ++i) {
                const double d = q[static_cast<std::size_t>(i)] - static_cast<double>(b.record(s)[static_cast<std::size_t>(i)]);
                d2 += d * d;
            }
            if (d2 < best) {
                best = d2;
                idx = s;
            }
        }
        const Match m = retrieve(b, q);
        EXPECT_EQ(m.index, idx);
        EXPECT_EQ(m.distance, std::sqrt(best));
    }
}

TEST(Retrieve, Errors) {
    FeatureBank empty;
    empty.dim = 3;
    EXPECT_THROW(retrieve(empty, std::vector<double>(3)), InvalidInput);
    Rng rng(3);
    const FeatureBank b = random_bank(rng, 4, 3);
    EXPECT_THROW(retrieve(b, std::vector<double>(4)), InvalidInput);
}

TEST(ViewDistance, Examples) {
    const FeatureSet a = with_global({1.0, 0.0, 0.0});
    const FeatureSet b = with_global({1.0, 1.0, 0.0});
    const std::vector<FeatureSet> same{a, a, a};
    EXPECT_EQ(view_distance(a, same), 0.0);
    EXPECT_EQ(view_distance(a, std::vector<FeatureSet>{b}), 1.0);
    EXPECT_DOUBLE_EQ(view_distance(a, std::vector<FeatureSet>{a, b}), 0.5 * view_distance(a, std::vector<FeatureSet>{b}));
    EXPECT_THROW(view_distance(a, std::vector<FeatureSet>{}), InvalidInput);
}

TEST(Verify, IdenticalCandidatesAcceptedAtZero) {
    const FeatureSet a = with_global({0.6, 0.8});
    const VerificationReport r = verify(a, {a, a, a}, 1.5, {}, 3);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.distance, 0.0);
    EXPECT_EQ(r.rounds, 1);
    EXPECT_EQ(r.frame_distances.size(), 3u);
}

TEST(Verify, ExhaustionRejectsAfterMaxRounds) {
    const FeatureSet a = with_global({0.0, 0.0});
    const FeatureSet far = with_global({3.0, 0.0});
    int calls = 0;
    const CandidateSource same = [&](int) {
        ++calls;
        return std::optional<std::vector<FeatureSet>>(std::vector<FeatureSet>{far});
    };
    const VerificationReport r = verify(a, {far}, 1.5, same, 3);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.rounds, 3);
    EXPECT_EQ(calls, 2);
    EXPECT_EQ(r.round_distances, (std::vector<double>{3.0, 3.0, 3.0}));
}

TEST(Verify, RegeneratedSetReplacesAndIsAccepted) {
    const FeatureSet a = with_global({0.0, 1.0});
    const FeatureSet far = with_global({0.0, 5.0});
    const CandidateSource regen = [&](int round) {
        EXPECT_EQ(round, 2);
        return std::optional<std::vector<FeatureSet>>(std::vector<FeatureSet>{a, a});
    };
    const VerificationReport r = verify(a, {far}, 1.5, regen, 3);
    EXPECT_TRUE(r.accepted);
    EXPECT_EQ(r.rounds, 2);
    EXPECT_EQ(r.distance, 0.0);
    EXPECT_EQ(r.frame_distances.size(), 2u);
}

TEST(Verify, Preconditions) {
    const FeatureSet a = with_global({1.0});
    EXPECT_THROW(verify(a, {a}, 0.0, {}, 1), InvalidInput);
    EXPECT_THROW(verify(a, {a}, 1.5, {}, 0), InvalidInput);
}

TEST(Calibration, MidpointAndSeparability) {
    const std::vector<double> same{0.1, 0.2, 0.15}, noise{0.9, 1.1};
    const ThresholdCalibration c = calibrate_threshold(same, noise);
    EXPECT_TRUE(c.separable);
    EXPECT_DOUBLE_EQ(c.threshold, 0.55);
    EXPECT_DOUBLE_EQ(c.same_max, 0.2);
    EXPECT_DOUBLE_EQ(c.noise_min, 0.9);
    EXPECT_FALSE(calibrate_threshold(std::vector<double>{1.0}, std::vector<double>{0.5}).separable);
}

TEST(BuildBank, SingleViewSingleCropGives256Records) {
    Rng rng(4);
    Image v(96, 64, 3);
    for (double& x : v.data) x = rng.uniform();
    Rng r1(9), r2(9);
    const BuiltinDescriptor d;
    const FeatureBank b = build_bank(std::vector<Image>{v}, d, 1, r1);
    EXPECT_EQ(b.size(), 256u);
    EXPECT_EQ(b.dim, 17);
    EXPECT_EQ(b.extractor, "builtin");
    const FeatureBank again = build_bank(std::vector<Image>{v}, d, 1, r2);
    EXPECT_EQ(b.data, again.data);
    EXPECT_EQ(b.patch_index.back(), 255u);
    Rng r3(9);
    EXPECT_EQ(build_bank(std::vector<Image>{v, v}, d, 2, r3).size(), 4u * 256u);
    EXPECT_THROW(build_bank(std::vector<Image>{}, d, 1, r3), InvalidInput);
}

TEST(SemanticTerm, Examples) {
    FeatureBank b;
    b.dim = 2;
    b.append(0, 0, std::vector<double>{0.0, 0.0});
    FeatureSet one;
    one.dim = 2;
    one.rows = one.cols = 1;
    one.patches = {3.0, 4.0};
    const SemanticResult r = semantic_term(one, b);
    EXPECT_EQ(r.value, 5.0);
    EXPECT_EQ(r.matches, std::vector<std::size_t>{0});
    EXPECT_NEAR(r.grad_patches[0], 0.6, 1e-15);
    EXPECT_NEAR(r.grad_patches[1], 0.8, 1e-15);

    FeatureSet exact;
    exact.dim = 2;
    exact.rows = 1;
    exact.cols = 2;
    exact.patches = {0.0, 0.0, 0.0, 0.0};
    const SemanticResult z = semantic_term(exact, b);
    EXPECT_EQ(z.value, 0.0);
    for (double g : z.grad_patches) EXPECT_EQ(g, 0.0);

    FeatureBank empty;
    empty.dim = 2;
    EXPECT_THROW(semantic_term(one, empty), InvalidInput);
}

TEST(SemanticTerm, GradientMatchesFiniteDifferencesWithFrozenMatches) {
    Rng rng(5);
    const FeatureBank b = random_bank(rng, 50, 5);
    FeatureSet fs;
    fs.dim = 5;
    fs.rows = 2;
    fs.cols = 3;
    fs.patches.resize(30);
    for (double& v : fs.patches) v = rng.uniform(-1, 1);
    const SemanticResult r = semantic_term(fs, b);
    for (std::size_t i = 0; i < fs.patches.size(); ++i) {
        const double n = glowgs::testing::central_diff(fs.patches[i], [&] { return semantic_term(fs, b).value; }, 1e-7);
        EXPECT_LT(glowgs::testing::rel_error(r.grad_patches[i], n), 1e-6);
    }
}
