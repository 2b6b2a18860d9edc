#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

namespace zcool {

enum class Manifold : uint8_t { S, D, Bracket };

// One ion's internal level: S1/2 qubit + Zeeman sublevels, the D3/2 F=1
// sublevels addressed by the 435 nm quadrupole transition, and the F=0
// bracket state the repump uses.
struct InternalState {
    Manifold manifold = Manifold::S;
    int f = 0;   // total angular momentum, 0 or 1
    int mf = 0;  // projection, -1..+1

    bool operator==(const InternalState&) const = default;
};

// Canonical states
constexpr InternalState qubit_zero() { return {Manifold::S, 0, 0}; }
constexpr InternalState qubit_one() { return {Manifold::S, 1, 0}; }
constexpr InternalState s_zeeman(int mf) { return {Manifold::S, 1, mf}; }
constexpr InternalState d_state(int mf) { return {Manifold::D, 1, mf}; }
constexpr InternalState bracket_state() { return {Manifold::Bracket, 0, 0}; }

bool is_valid(const InternalState& s);
std::string to_string(const InternalState& s);

// Dense index for probability tables: S00, S1-1, S10, S11, D1-1, D10, D11, Bracket.
inline constexpr int kNumLevels = 8;
int level_index(const InternalState& s);
InternalState level_from_index(int idx);

struct LevelConfig {
    double zeeman_shift_hz = 11e6;  // splitting of adjacent mF levels in S,F=1
    double d_zeeman_ratio = 1.0;    // D-manifold Zeeman splitting relative to S
    // Repump branching weights over (S,1,-1), (S,1,0), (S,1,+1); renormalized.
    std::array<double, 3> repump_branching_weights{1.0, 1.0, 1.0};
};

// Carrier frequency offset of the a -> b transition relative to the
// |1> -> (D,1,0) reference, from the Zeeman ladder. Allowed pairs:
// S<->D (435 nm quadrupole), S<->S (MW/RF/Raman beat), D<->Bracket (935 nm).
double transition_offset_hz(const InternalState& a, const InternalState& b,
                            const LevelConfig& cfg);

// Quadrupole selection rule |dmF| <= 2 on the raw projection difference.
bool quadrupole_delta_m_allowed(int delta_m);
// Typed wrapper for S<->D pairs.
bool quadrupole_allowed(const InternalState& a, const InternalState& b);

// Spontaneous-emission branching from the bracket state back into S,F=1.
// Decay to |0> is forbidden, so its probability is exactly zero.
std::array<std::pair<InternalState, double>, 3> repump_branching(
    const InternalState& from, const LevelConfig& cfg = {});

}  // namespace zcool
