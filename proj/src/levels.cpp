#include "zcool/levels.hpp"

#include <cmath>
#include <stdexcept>

namespace zcool {

bool is_valid(const InternalState& s) {
    switch (s.manifold) {
        case Manifold::S:
            if (s.f == 0) return s.mf == 0;
            if (s.f == 1) return s.mf >= -1 && s.mf <= 1;
            return false;
        case Manifold::D:
            return s.f == 1 && s.mf >= -1 && s.mf <= 1;
        case Manifold::Bracket:
            return s.f == 0 && s.mf == 0;
    }
    return false;
}

std::string to_string(const InternalState& s) {
    if (s == qubit_zero()) return "|0>";
    if (s == qubit_one()) return "|1>";
    const char* m = s.manifold == Manifold::S   ? "S"
                    : s.manifold == Manifold::D ? "D"
                                                : "[3/2]";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "|%s,%d,%+d>", m, s.f, s.mf);
    return buf;
}

int level_index(const InternalState& s) {
    if (!is_valid(s)) throw std::invalid_argument("invalid internal state");
    switch (s.manifold) {
        case Manifold::S:
            return s.f == 0 ? 0 : 2 + s.mf;  // 1,2,3 for mF=-1,0,+1
        case Manifold::D:
            return 5 + s.mf;  // 4,5,6
        case Manifold::Bracket:
            return 7;
    }
    throw std::invalid_argument("invalid internal state");
}

InternalState level_from_index(int idx) {
    switch (idx) {
        case 0: return qubit_zero();
        case 1: return s_zeeman(-1);
        case 2: return qubit_one();
        case 3: return s_zeeman(+1);
        case 4: return d_state(-1);
        case 5: return d_state(0);
        case 6: return d_state(+1);
        case 7: return bracket_state();
    }
    throw std::out_of_range("level index must be 0..7");
}

namespace {

// Position of a level on the Zeeman ladder, relative to the mF=0 level of
// its own manifold. The |1> -> (D,1,0) carrier is the zero of the offset
// scale, so manifold-to-manifold gaps never appear in returned offsets.
double zeeman_ladder_hz(const InternalState& s, const LevelConfig& cfg) {
    switch (s.manifold) {
        case Manifold::S:
            return s.mf * cfg.zeeman_shift_hz;
        case Manifold::D:
            return s.mf * cfg.zeeman_shift_hz * cfg.d_zeeman_ratio;
        case Manifold::Bracket:
            return 0.0;
    }
    return 0.0;
}

}  // namespace

double transition_offset_hz(const InternalState& a, const InternalState& b,
                            const LevelConfig& cfg) {
    if (!is_valid(a) || !is_valid(b))
        throw std::invalid_argument("transition_offset: invalid internal state");
    if (a == b) throw std::invalid_argument("transition_offset: identical states");
    if (cfg.zeeman_shift_hz <= 0.0)
        throw std::invalid_argument("transition_offset: zeeman_shift_hz must be > 0");

    const Manifold ma = a.manifold, mb = b.manifold;
    const bool s_d = (ma == Manifold::S && mb == Manifold::D) ||
                     (ma == Manifold::D && mb == Manifold::S);
    const bool s_s = ma == Manifold::S && mb == Manifold::S;
    const bool d_bracket = (ma == Manifold::D && mb == Manifold::Bracket) ||
                           (ma == Manifold::Bracket && mb == Manifold::D);
    if (!s_d && !s_s && !d_bracket)
        throw std::invalid_argument("transition_offset: unmodeled manifold pair " +
                                    to_string(a) + " -> " + to_string(b));

    return zeeman_ladder_hz(b, cfg) - zeeman_ladder_hz(a, cfg);
}

bool quadrupole_delta_m_allowed(int delta_m) { return std::abs(delta_m) <= 2; }

bool quadrupole_allowed(const InternalState& a, const InternalState& b) {
    if (!is_valid(a) || !is_valid(b))
        throw std::invalid_argument("quadrupole_allowed: invalid internal state");
    const bool s_d = (a.manifold == Manifold::S && b.manifold == Manifold::D) ||
                     (a.manifold == Manifold::D && b.manifold == Manifold::S);
    if (!s_d)
        throw std::invalid_argument("quadrupole_allowed: expects an S<->D pair, got " +
                                    to_string(a) + " and " + to_string(b));
    return quadrupole_delta_m_allowed(b.mf - a.mf);
}

std::array<std::pair<InternalState, double>, 3> repump_branching(
    const InternalState& from, const LevelConfig& cfg) {
    if (!is_valid(from) || from.manifold != Manifold::D)
        throw std::invalid_argument("repump_branching: input must be a D,F=1 sublevel, got " +
                                    to_string(from));
    double norm = cfg.repump_branching_weights[0] + cfg.repump_branching_weights[1] +
                  cfg.repump_branching_weights[2];
    if (norm <= 0.0)
        throw std::invalid_argument("repump_branching: branching weights must sum to > 0");
    return {{{s_zeeman(-1), cfg.repump_branching_weights[0] / norm},
             {s_zeeman(0), cfg.repump_branching_weights[1] / norm},
             {s_zeeman(+1), cfg.repump_branching_weights[2] / norm}}};
}

}  // namespace zcool
