#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "zcool/levels.hpp"

using namespace zcool;

namespace {

std::vector<InternalState> all_states() {
    std::vector<InternalState> v;
    for (int l = 0; l < kNumLevels; ++l) v.push_back(level_from_index(l));
    return v;
}

bool offset_defined(const InternalState& a, const InternalState& b) {
    const auto ma = a.manifold, mb = b.manifold;
    if (a == b) return false;
    if (ma == Manifold::S && mb == Manifold::S) return true;
    if ((ma == Manifold::S && mb == Manifold::D) ||
        (ma == Manifold::D && mb == Manifold::S))
        return true;
    return (ma == Manifold::D && mb == Manifold::Bracket) ||
           (ma == Manifold::Bracket && mb == Manifold::D);
}

}  // namespace

TEST_CASE("transition offsets on the Zeeman ladder") {
    LevelConfig cfg;  // 11 MHz, ratio 1

    // reference transition
    CHECK(transition_offset_hz(qubit_one(), d_state(0), cfg) == doctest::Approx(0.0));

    // adjacent Zeeman step in the S manifold
    CHECK(transition_offset_hz(s_zeeman(0), s_zeeman(+1), cfg) ==
          doctest::Approx(11e6));

    // shelving transition: hand arithmetic -(Z)(1 + r) for arbitrary ratio
    for (double r : {1.0, 0.4, 2.3}) {
        LevelConfig c;
        c.d_zeeman_ratio = r;
        CHECK(transition_offset_hz(s_zeeman(+1), d_state(-1), c) ==
              doctest::Approx(-11e6 * (1.0 + r)).epsilon(1e-12));
    }
}

TEST_CASE("transition offset is antisymmetric over all valid pairs") {
    LevelConfig cfg;
    cfg.d_zeeman_ratio = 0.73;
    for (const auto& a : all_states()) {
        for (const auto& b : all_states()) {
            if (!offset_defined(a, b)) continue;
            CHECK(transition_offset_hz(a, b, cfg) ==
                  doctest::Approx(-transition_offset_hz(b, a, cfg)).epsilon(1e-12));
        }
    }
}

TEST_CASE("unmodeled manifold pairs are rejected") {
    LevelConfig cfg;
    CHECK_THROWS_AS(transition_offset_hz(qubit_zero(), bracket_state(), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(transition_offset_hz(d_state(0), d_state(1), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(transition_offset_hz(qubit_one(), qubit_one(), cfg),
                    std::invalid_argument);
}

TEST_CASE("quadrupole selection rule") {
    // the three transitions the protocol drives
    CHECK(quadrupole_allowed(s_zeeman(+1), d_state(-1)));
    CHECK(quadrupole_allowed(s_zeeman(-1), d_state(+1)));
    CHECK(quadrupole_allowed(qubit_one(), d_state(0)));

    // boundary of the |dm| <= 2 rule
    CHECK(quadrupole_delta_m_allowed(2));
    CHECK(quadrupole_delta_m_allowed(-2));
    CHECK_FALSE(quadrupole_delta_m_allowed(3));
    CHECK_FALSE(quadrupole_delta_m_allowed(-3));

    CHECK_THROWS_AS(quadrupole_allowed(qubit_zero(), qubit_one()), std::invalid_argument);
}

TEST_CASE("quadrupole rule is symmetric") {
    for (int m1 = -1; m1 <= 1; ++m1)
        for (int m2 = -1; m2 <= 1; ++m2)
            CHECK(quadrupole_allowed(s_zeeman(m1), d_state(m2)) ==
                  quadrupole_allowed(d_state(m2), s_zeeman(m1)));
}

TEST_CASE("repump branching") {
    LevelConfig cfg;
    for (int mf = -1; mf <= 1; ++mf) {
        const auto br = repump_branching(d_state(mf), cfg);
        double sum = 0.0;
        for (const auto& [dest, p] : br) {
            CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
            CHECK(dest.manifold == Manifold::S);
            CHECK(dest.f == 1);
            CHECK(dest != qubit_zero());
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(repump_branching(qubit_one(), cfg), std::invalid_argument);
}

TEST_CASE("repump branching override renormalizes") {
    LevelConfig cfg;
    cfg.repump_branching_weights = {2.0, 1.0, 1.0};
    const auto br = repump_branching(d_state(0), cfg);
    CHECK(br[0].second == doctest::Approx(0.5));
    CHECK(br[1].second == doctest::Approx(0.25));
    CHECK(br[2].second == doctest::Approx(0.25));
}

TEST_CASE("level index round trip") {
    for (int l = 0; l < kNumLevels; ++l)
        CHECK(level_index(level_from_index(l)) == l);
    CHECK(level_index(qubit_zero()) == 0);
    CHECK(level_index(qubit_one()) == 2);
}
