#include <doctest.h>

#include "freqpriv/dft.hpp"
#include "freqpriv/tape.hpp"
#include "test_helpers.hpp"

using namespace freqpriv;
using freqpriv::test::random_vector;

namespace {

constexpr double kEps = 1e-5;

GradGroup group(const char* name, std::vector<double> v) {
    return {name, std::move(v)};
}

// random but fixed projections so tensor-valued ops reduce to scalars
std::vector<double> proj(size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return random_vector(n, rng);
}

}  // namespace

TEST_CASE("gradcheck: dft2 -> idft2 chain is exact up to rounding") {
    Rng rng(31);
    const auto x = random_vector(2 * 4 * 4, rng);
    const auto p = proj(2 * 4 * 4, 901);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        const Var shaped = t.reshape(leaves[0], 2, 4, 4);
        return t.dot(t.idft2(t.dft2(shaped)), p);
    });
    const auto report = gradcheck(problem, {group("x", x)}, kEps);
    CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("gradcheck: dft2 alone via complex projection") {
    Rng rng(32);
    const auto x = random_vector(1 * 3 * 5, rng);
    const auto pre = proj(15, 902);
    const auto pim = proj(15, 903);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.dot(t.dft2(t.reshape(leaves[0], 1, 3, 5)), pre, pim);
    });
    CHECK(gradcheck(problem, {group("x", x)}, kEps).max_rel_err < 1e-10);
}

TEST_CASE("gradcheck: conv1x1 w.r.t. input, weight, bias") {
    Rng rng(33);
    const auto x = random_vector(3 * 4 * 4, rng);
    const auto w = random_vector(2 * 3, rng);
    const auto b = random_vector(2, rng);
    const auto p = proj(2 * 4 * 4, 904);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        const Var out = t.conv1x1(t.reshape(leaves[0], 3, 4, 4), leaves[1], leaves[2], 2);
        return t.dot(out, p);
    });
    const auto report =
        gradcheck(problem, {group("x", x), group("w", w), group("b", b)}, kEps);
    CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("gradcheck: conv3x3s2 w.r.t. input, weight, bias") {
    Rng rng(34);
    const auto x = random_vector(2 * 5 * 5, rng);
    const auto w = random_vector(2 * 2 * 9, rng);
    const auto b = random_vector(2, rng);
    const auto p = proj(2 * 3 * 3, 905);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        const Var out = t.conv3x3s2(t.reshape(leaves[0], 2, 5, 5), leaves[1], leaves[2], 2);
        return t.dot(out, p);
    });
    const auto report =
        gradcheck(problem, {group("x", x), group("w", w), group("b", b)}, kEps);
    CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("gradcheck: bilinear_resize and window_resample") {
    Rng rng(35);
    const auto x = random_vector(1 * 4 * 4, rng);
    const auto p = proj(1 * 6 * 6, 906);
    const auto up = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.dot(t.bilinear_resize(t.reshape(leaves[0], 1, 4, 4), 6, 6), p);
    });
    CHECK(gradcheck(up, {group("x", x)}, kEps).max_rel_err < 1e-10);

    const SampleWindow win{0.7, 1.2, 2.3, 1.9};
    const auto p2 = proj(1 * 3 * 3, 907);
    const auto crop = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.dot(t.window_resample(t.reshape(leaves[0], 1, 4, 4), win, 3, 3), p2);
    });
    CHECK(gradcheck(crop, {group("x", x)}, kEps).max_rel_err < 1e-10);
}

TEST_CASE("gradcheck: sigmoid at a random point stays within 1e-4") {
    Rng rng(36);
    const auto x = random_vector(12, rng, -3.0, 3.0);
    const auto p = proj(12, 908);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.dot(t.sigmoid(t.reshape(leaves[0], 1, 1, 12)), p);
    });
    CHECK(gradcheck(problem, {group("x", x)}, kEps).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: leaky_relu away from the kink") {
    Rng rng(37);
    auto x = random_vector(16, rng, 0.2, 2.0);
    for (size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];  // both branches, |x| >= 0.2
    const auto p = proj(16, 909);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.dot(t.leaky_relu(t.reshape(leaves[0], 1, 4, 4), 0.1), p);
    });
    CHECK(gradcheck(problem, {group("x", x)}, kEps).max_rel_err < 1e-10);
}

TEST_CASE("gradcheck: gate applied between the transforms") {
    Rng rng(38);
    const auto x = random_vector(1 * 4 * 4, rng);
    const auto logits = random_vector(1 * 4 * 4, rng, -2.0, 2.0);
    const auto p = proj(1 * 4 * 4, 910);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        const Var shaped = t.reshape(leaves[0], 1, 4, 4);
        const Var gate = t.reshape(leaves[1], 1, 4, 4);
        return t.dot(t.idft2(t.apply_gate(t.dft2(shaped), gate)), p);
    });
    const auto report =
        gradcheck(problem, {group("x", x), group("logits", logits)}, kEps);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: weighted spectral distance to a constant target") {
    Rng rng(39);
    const auto x = random_vector(2 * 4 * 4, rng);
    Spectrum target(2, 4, 4);
    for (auto& v : target.values) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    std::vector<double> binw(16);
    for (double& v : binw) v = rng.uniform(1.0, 3.0);

    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.weighted_spectral_sqdist(t.dft2(t.reshape(leaves[0], 2, 4, 4)),
                                          target, binw);
    });
    CHECK(gradcheck(problem, {group("x", x)}, kEps).max_rel_err < 1e-4);
}

TEST_CASE("gradcheck: concat, add, scalar ops compose") {
    Rng rng(40);
    const auto a = random_vector(1 * 3 * 3, rng);
    const auto b = random_vector(1 * 3 * 3, rng);
    const auto p = proj(2 * 3 * 3, 911);
    const auto problem = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        const Var av = t.reshape(leaves[0], 1, 3, 3);
        const Var bv = t.reshape(leaves[1], 1, 3, 3);
        const SVar s1 = t.dot(t.concat_channels(av, bv), p);
        const SVar s2 = t.dot(t.add(av, bv), proj(9, 912));
        return t.add(t.scale(s1, 0.5), s2);
    });
    const auto report = gradcheck(problem, {group("a", a), group("b", b)}, kEps);
    CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("a corrupted VJP is flagged by gradcheck") {
    Rng rng(41);
    const auto x = random_vector(8, rng, -2.0, 2.0);
    const auto p = proj(8, 913);
    const auto honest = make_tape_problem([&](Tape& t, const std::vector<Var>& leaves) {
        return t.dot(t.sigmoid(t.reshape(leaves[0], 1, 1, 8)), p);
    });
    GradCheckProblem corrupted;
    corrupted.value = honest.value;
    corrupted.gradient = [&](const std::vector<std::vector<double>>& point) {
        auto g = honest.gradient(point);
        for (auto& grp : g) {
            for (double& v : grp) v *= 1.01;
        }
        return g;
    };
    const auto report = gradcheck(corrupted, {group("x", x)}, kEps);
    CHECK(report.max_rel_err > 1e-4);
    CHECK(report.worst_group == "x");
}

TEST_CASE("non-finite intermediates raise a diagnostic naming the op") {
    Tape t;
    t.check_finite = true;
    const Var x = t.leaf_vector({1e308, 1e308});
    const Var shaped = t.reshape(x, 1, 1, 2);
    CHECK_THROWS_WITH_AS(t.add(shaped, shaped), doctest::Contains("add"), NumericError);
}

TEST_CASE("backward accumulates through shared subexpressions") {
    // y = <p, x + x> => dy/dx = 2p
    Tape t;
    const Var x = t.leaf_vector({1.0, -2.0, 3.0});
    const Var shaped = t.reshape(x, 1, 1, 3);
    const std::vector<double> p{0.5, 1.5, -1.0};
    const SVar y = t.dot(t.add(shaped, shaped), p);
    t.backward(y);
    const auto& g = t.grad(x).values;
    for (size_t i = 0; i < p.size(); ++i) {
        CHECK(g[i] == doctest::Approx(2.0 * p[i]));
    }
}
