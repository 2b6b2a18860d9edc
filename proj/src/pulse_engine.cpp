#include "zcool/pulse_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "zcool/constants.hpp"

namespace zcool {

namespace {

constexpr double kProbFloor = 1e-14;  // skip channels below this transfer probability

template <typename Fn>
void parallel_trajectories(std::vector<Trajectory>& ts, int threads, Fn&& fn) {
    const int n = static_cast<int>(ts.size());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (auto& t : ts) fn(t);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads) fn(ts[i]);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

bool is_s1(const InternalState& s) { return s.manifold == Manifold::S && s.f == 1; }

}  // namespace

void PulseSpec::validate(int n_ions, int n_tracked_modes) const {
    if (target_ion && (*target_ion < 0 || *target_ion >= n_ions))
        throw std::invalid_argument("pulse target ion out of range");
    if (duration_s < 0) throw std::invalid_argument("pulse duration must be >= 0");
    if (rabi_hz < 0) throw std::invalid_argument("pulse rabi_hz must be >= 0");
    if (transfer_scale < 0 || transfer_scale > 1)
        throw std::invalid_argument("pulse transfer_scale must be in [0,1]");
    switch (kind) {
        case PulseKind::mw_pi:
        case PulseKind::mw_pi_half:
            if (from.manifold != Manifold::S || to.manifold != Manifold::S)
                throw std::invalid_argument("MW pulse must address an S<->S transition");
            break;
        case PulseKind::raman_two_tone:
            if (!target_ion)
                throw std::invalid_argument(
                    "Raman two-tone pulse requires a single addressed ion");
            if (from.manifold != Manifold::S || to.manifold != Manifold::S)
                throw std::invalid_argument("Raman pulse must address an S<->S transition");
            break;
        case PulseKind::rsb_shelve: {
            if (!(is_s1(from) && to.manifold == Manifold::D))
                throw std::invalid_argument(
                    "shelving pulse must address (S,F=1) -> D; got " + to_string(from) +
                    " -> " + to_string(to));
            if (!quadrupole_allowed(from, to))
                throw std::invalid_argument("shelving transition violates the quadrupole "
                                            "selection rule: " + to_string(from) + " -> " +
                                            to_string(to));
            if (sideband_mode < 0 || sideband_mode >= std::max(1, n_tracked_modes))
                throw std::invalid_argument("pulse sideband_mode out of range");
            if (sideband_order < -1 || sideband_order > 1)
                throw std::invalid_argument("pulse sideband_order must be -1, 0 or +1");
            break;
        }
        case PulseKind::repump:
        case PulseKind::idle:
            break;
    }
}

double TrackedModes::axial_dw_mean(int ion) const {
    double f = 1.0;
    for (int a = 0; a < n_axial(); ++a) {
        const double e2 = axial_eta(ion, a) * axial_eta(ion, a);
        f *= 1.0 - e2 * (axial_nbar[a] + 0.5);
    }
    return f;
}

double thermal_nbar(double freq_hz, double temperature_k) {
    if (temperature_k <= 0.0) return 0.0;
    const double x = constants::h_planck * freq_hz /
                     (constants::k_boltzmann * temperature_k);
    return 1.0 / std::expm1(x);
}

TrackedModes make_tracked_modes(const TrapConfig& trap, const ModeStructure& radial,
                                const ModeStructure& axial,
                                const std::vector<int>& radial_modes,
                                double doppler_temperature_k) {
    TrackedModes tm;
    tm.n_ions = trap.n_ions;
    tm.radial_index = radial_modes;
    tm.eta.resize(trap.n_ions, static_cast<int>(radial_modes.size()));
    for (int m = 0; m < static_cast<int>(radial_modes.size()); ++m) {
        const int rm = radial_modes[m];
        if (rm < 0 || rm >= static_cast<int>(radial.frequencies_hz.size()))
            throw std::invalid_argument("tracked radial mode index out of range");
        tm.freq_hz.push_back(radial.frequencies_hz[rm]);
        tm.eta.col(m) = radial.lamb_dicke.col(rm);
    }
    if (doppler_temperature_k > 0.0) {
        tm.axial_freq_hz = axial.frequencies_hz;
        tm.axial_eta = axial.lamb_dicke;
        for (double f : axial.frequencies_hz)
            tm.axial_nbar.push_back(thermal_nbar(f, doppler_temperature_k));
    } else {
        tm.axial_eta.resize(trap.n_ions, 0);
    }
    return tm;
}

double effective_rsb_rabi(double rabi, double eta_rad,
                          const std::vector<double>& eta_axial, int n,
                          const std::vector<double>& n_axial) {
    if (n < 1)
        throw std::invalid_argument(
            "effective_rsb_rabi: red sideband needs n >= 1 (no lower Fock state)");
    if (eta_axial.size() != n_axial.size())
        throw std::invalid_argument("effective_rsb_rabi: eta/occupation size mismatch");
    double dw = 1.0;
    for (size_t k = 0; k < eta_axial.size(); ++k)
        dw *= 1.0 - eta_axial[k] * eta_axial[k] * (n_axial[k] + 0.5);
    return rabi * eta_rad * std::sqrt(static_cast<double>(n)) * dw;
}

double light_shift_hz(const std::vector<std::pair<double, double>>& rabi_detuning_hz) {
    double s = 0.0;
    for (const auto& [rabi, det] : rabi_detuning_hz) {
        if (det == 0.0)
            throw std::invalid_argument(
                "light_shift: zero detuning (a resonant term is not a shift)");
        s += rabi * rabi / (4.0 * det);
    }
    return s;
}

// ---------------------------------------------------------------------------
// SystemState

double SystemState::total_probability() const {
    if (backend == Backend::monte_carlo) return 1.0;
    return joint.sum();
}

Eigen::VectorXd SystemState::fock_distribution(int mode) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
    if (backend == Backend::monte_carlo) {
        for (const auto& t : traj) p[t.fock[mode]] += 1.0;
        p /= static_cast<double>(traj.size());
    } else {
        if (mode != 0) throw std::invalid_argument("rate backend tracks a single mode");
        for (int n = 0; n <= n_max; ++n) p[n] = joint.col(n).sum();
    }
    return p;
}

double SystemState::mean_fock(int mode) const {
    if (backend == Backend::monte_carlo) {
        double s = 0.0;
        for (const auto& t : traj) s += t.fock[mode];
        return s / static_cast<double>(traj.size());
    }
    const Eigen::VectorXd p = fock_distribution(mode);
    double s = 0.0;
    for (int n = 0; n <= n_max; ++n) s += n * p[n];
    return s / p.sum();
}

double SystemState::mean_fock_stderr(int mode) const {
    if (backend != Backend::monte_carlo) return 0.0;
    const double m = mean_fock(mode);
    double v = 0.0;
    for (const auto& t : traj) v += (t.fock[mode] - m) * (t.fock[mode] - m);
    v /= static_cast<double>(traj.size() - 1);
    return std::sqrt(v / static_cast<double>(traj.size()));
}

Eigen::VectorXd SystemState::level_populations(int ion) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(kNumLevels);
    if (backend == Backend::monte_carlo) {
        for (const auto& t : traj) p[t.internal[ion]] += 1.0;
        p /= static_cast<double>(traj.size());
    } else if (ion == joint_ion) {
        for (int l = 0; l < kNumLevels; ++l) p[l] = joint.row(l).sum();
    } else {
        p = others[ion < joint_ion ? ion : ion - 1];
    }
    return p;
}

SystemState make_state(const TrackedModes& modes, const EngineParams& params,
                       const std::vector<InternalState>& internal_init,
                       const std::vector<double>& nbar_tracked, int joint_ion) {
    if (static_cast<int>(internal_init.size()) != modes.n_ions)
        throw std::invalid_argument("make_state: one initial internal state per ion");
    if (static_cast<int>(nbar_tracked.size()) != modes.n_tracked())
        throw std::invalid_argument("make_state: one nbar per tracked mode");

    SystemState st;
    st.backend = params.backend;
    st.n_ions = modes.n_ions;
    st.n_max = params.n_max;
    st.threads = params.threads;

    if (params.backend == Backend::monte_carlo) {
        st.traj.resize(params.trajectories);
        for (int k = 0; k < params.trajectories; ++k) {
            auto& t = st.traj[k];
            t.rng = Rng(derive_seed(params.master_seed, static_cast<uint64_t>(k)));
            t.internal.resize(modes.n_ions);
            for (int i = 0; i < modes.n_ions; ++i)
                t.internal[i] = level_index(internal_init[i]);
            t.fock.resize(modes.n_tracked());
            for (int m = 0; m < modes.n_tracked(); ++m) {
                int n = t.rng.thermal_fock(nbar_tracked[m]);
                while (n > params.n_max) n = t.rng.thermal_fock(nbar_tracked[m]);
                t.fock[m] = n;
            }
            t.axial_n.resize(modes.n_axial());
            for (int a = 0; a < modes.n_axial(); ++a)
                t.axial_n[a] = t.rng.thermal_fock(modes.axial_nbar[a]);
            t.phase.assign(modes.n_ions, 0.0);
        }
    } else {
        if (modes.n_tracked() != 1)
            throw std::invalid_argument(
                "rate backend tracks exactly one mode's Fock ladder");
        st.joint_ion = joint_ion;
        st.joint = Eigen::MatrixXd::Zero(kNumLevels, params.n_max + 1);
        const double nbar = nbar_tracked[0];
        Eigen::VectorXd th(params.n_max + 1);
        if (nbar <= 0.0) {
            th.setZero();
            th[0] = 1.0;
        } else {
            const double q = nbar / (nbar + 1.0);
            for (int n = 0; n <= params.n_max; ++n) th[n] = std::pow(q, n);
            th /= th.sum();
        }
        st.joint.row(level_index(internal_init[joint_ion])) = th.transpose();
        for (int i = 0; i < modes.n_ions; ++i) {
            if (i == joint_ion) continue;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(kNumLevels);
            v[level_index(internal_init[i])] = 1.0;
            st.others.push_back(v);
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// PulseEngine

PulseEngine::PulseEngine(LevelConfig levels, TrackedModes modes, EngineParams params)
    : levels_(std::move(levels)), modes_(std::move(modes)), params_(params) {}

SystemState PulseEngine::make_thermal_state(const std::vector<InternalState>& init,
                                            const std::vector<double>& nbar_tracked,
                                            int joint_ion) const {
    return make_state(modes_, params_, init, nbar_tracked, joint_ion);
}

double PulseEngine::channel_probability(const Channel& ch, double duration_s) const {
    const double omega = constants::two_pi * ch.coupling;  // coupling carries rabi_hz
    if (omega == 0.0) return 0.0;
    const double delta = constants::two_pi * ch.detuning_hz;
    const double x2 = omega * omega + delta * delta;
    const double s = std::sin(0.5 * std::sqrt(x2) * duration_s);
    return (omega * omega / x2) * s * s;
}

std::vector<PulseEngine::Channel> PulseEngine::quadrupole_channels(
    int label, const PulseSpec& pulse, const std::vector<int>& fock,
    const std::vector<double>& axial_occ, int ion) const {
    std::vector<Channel> out;
    const InternalState s = level_from_index(label);
    // (S,0,0) sits one hyperfine splitting away from every modeled 435 nm
    // resonance and the bracket state is not laser-coupled here.
    if (!(is_s1(s) || s.manifold == Manifold::D)) return out;

    const double pulse_offset =
        transition_offset_hz(pulse.from, pulse.to, levels_) +
        pulse.sideband_order * (modes_.n_tracked() > 0
                                    ? modes_.freq_hz[pulse.sideband_mode]
                                    : 0.0) +
        pulse.detuning_hz;

    const int n_tracked = modes_.n_tracked();
    const int n_axial = static_cast<int>(axial_occ.size());

    // Debye-Waller products for this ion at the current occupations
    auto radial_dw = [&](int skip_mode) {
        double f = 1.0;
        for (int m = 0; m < n_tracked; ++m) {
            if (m == skip_mode) continue;
            const double e2 = modes_.eta(ion, m) * modes_.eta(ion, m);
            f *= 1.0 - e2 * (fock[m] + 0.5);
        }
        return f;
    };
    auto axial_dw = [&](int skip_mode) {
        double f = 1.0;
        for (int a = 0; a < n_axial; ++a) {
            if (a == skip_mode) continue;
            const double e2 = modes_.axial_eta(ion, a) * modes_.axial_eta(ion, a);
            f *= 1.0 - e2 * (axial_occ[a] + 0.5);
        }
        return f;
    };
    const double dw_rad_all = radial_dw(-1);
    const double dw_ax_all = axial_dw(-1);

    const bool from_s = is_s1(s);
    // Enumerate over the quadrupole-allowed partner states.
    for (int mf = -1; mf <= 1; ++mf) {
        const InternalState partner = from_s ? d_state(mf) : s_zeeman(mf);
        const InternalState s_side = from_s ? s : partner;
        const InternalState d_side = from_s ? partner : s;
        if (!quadrupole_allowed(s_side, d_side)) continue;
        const double base = transition_offset_hz(s_side, d_side, levels_);
        const int partner_label = level_index(partner);

        auto push = [&](int mode, int fock_delta, int ax_mode, int ax_delta,
                        double resonance, double coupling) {
            if (coupling == 0.0) return;
            Channel ch;
            ch.from_label = label;
            ch.to_label = partner_label;
            ch.mode = mode;
            ch.fock_delta = fock_delta;
            ch.axial_mode = ax_mode;
            ch.axial_delta = ax_delta;
            ch.detuning_hz = pulse_offset - resonance;
            ch.coupling = coupling * pulse.rabi_hz;
            out.push_back(ch);
        };

        // carrier
        push(-1, 0, -1, 0, base, dw_rad_all * dw_ax_all);

        // first sidebands of the tracked radial modes; the red channel pairs
        // (S,n) <-> (D,n-1), so the Fock shift depends on which side we sit.
        for (int m = 0; m < n_tracked; ++m) {
            const double eta = modes_.eta(ion, m);
            const double nu = modes_.freq_hz[m];
            const double dw = radial_dw(m) * dw_ax_all;
            if (from_s) {
                if (fock[m] >= 1)
                    push(m, -1, -1, 0, base - nu, eta * std::sqrt(fock[m]) * dw);
                push(m, +1, -1, 0, base + nu, eta * std::sqrt(fock[m] + 1.0) * dw);
            } else {
                push(m, +1, -1, 0, base - nu, eta * std::sqrt(fock[m] + 1.0) * dw);
                if (fock[m] >= 1)
                    push(m, -1, -1, 0, base + nu, eta * std::sqrt(fock[m]) * dw);
            }
        }

        // axial spectator sidebands (off-resonant by >= nu_ax)
        if (params_.axial_sideband_channels) {
            for (int a = 0; a < n_axial; ++a) {
                const double eta = modes_.axial_eta(ion, a);
                const double nu = modes_.axial_freq_hz[a];
                const double dw = dw_rad_all * axial_dw(a);
                const double occ = axial_occ[a];
                if (from_s) {
                    if (occ >= 1.0)
                        push(-1, 0, a, -1, base - nu, eta * std::sqrt(occ) * dw);
                    push(-1, 0, a, +1, base + nu, eta * std::sqrt(occ + 1.0) * dw);
                } else {
                    push(-1, 0, a, +1, base - nu, eta * std::sqrt(occ + 1.0) * dw);
                    if (occ >= 1.0)
                        push(-1, 0, a, -1, base + nu, eta * std::sqrt(occ) * dw);
                }
            }
        }
    }

    // Deterministic evaluation order: nearest resonance first.
    std::sort(out.begin(), out.end(), [](const Channel& a, const Channel& b) {
        const double da = std::abs(a.detuning_hz), db = std::abs(b.detuning_hz);
        if (da != db) return da < db;
        if (a.to_label != b.to_label) return a.to_label < b.to_label;
        if (a.mode != b.mode) return a.mode < b.mode;
        return a.axial_mode < b.axial_mode;
    });
    return out;
}

void PulseEngine::drive_trajectory(Trajectory& t, const PulseSpec& pulse) const {
    std::vector<int> targets;
    if (pulse.target_ion)
        targets.push_back(*pulse.target_ion);
    else
        for (int i = 0; i < modes_.n_ions; ++i) targets.push_back(i);

    for (int ion : targets) {
        const int label = t.internal[ion];
        if (label == level_index(bracket_state()))
            throw std::runtime_error("apply_drive: ion " + std::to_string(ion) +
                                     " is in the bracket state; repump first");

        if (pulse.kind == PulseKind::mw_pi || pulse.kind == PulseKind::mw_pi_half ||
            pulse.kind == PulseKind::raman_two_tone) {
            const int from_l = level_index(pulse.from);
            const int to_l = level_index(pulse.to);
            int dest;
            if (label == from_l)
                dest = to_l;
            else if (label == to_l)
                dest = from_l;
            else
                continue;
            double p;
            if (pulse.rabi_hz == 0.0 && pulse.duration_s == 0.0) {
                // idealized gate shorthand
                p = pulse.kind == PulseKind::mw_pi_half ? 0.5 : 1.0;
            } else {
                const double omega = constants::two_pi * pulse.rabi_hz;
                const double delta = constants::two_pi * pulse.detuning_hz;
                const double x2 = omega * omega + delta * delta;
                const double sn = std::sin(0.5 * std::sqrt(x2) * pulse.duration_s);
                p = x2 == 0.0 ? 0.0 : (omega * omega / x2) * sn * sn;
            }
            if (t.rng.bernoulli(pulse.transfer_scale * p)) t.internal[ion] = dest;
            continue;
        }

        // quadrupole drive
        std::vector<double> occ(t.axial_n.begin(), t.axial_n.end());
        const auto channels = quadrupole_channels(label, pulse, t.fock, occ, ion);
        for (const auto& ch : channels) {
            const double p = pulse.transfer_scale * channel_probability(ch, pulse.duration_s);
            if (p < kProbFloor) continue;
            if (t.rng.bernoulli(p)) {
                t.internal[ion] = ch.to_label;
                if (ch.mode >= 0)
                    t.fock[ch.mode] =
                        std::min(params_.n_max, t.fock[ch.mode] + ch.fock_delta);
                if (ch.axial_mode >= 0)
                    t.axial_n[ch.axial_mode] =
                        std::max(0, t.axial_n[ch.axial_mode] + ch.axial_delta);
                break;
            }
        }
    }
}

void PulseEngine::drive_rate(SystemState& state, const PulseSpec& pulse) const {
    std::vector<int> targets;
    if (pulse.target_ion)
        targets.push_back(*pulse.target_ion);
    else
        for (int i = 0; i < modes_.n_ions; ++i) targets.push_back(i);

    const int bracket_l = level_index(bracket_state());
    const std::vector<double> occ(modes_.axial_nbar.begin(), modes_.axial_nbar.end());

    for (int ion : targets) {
        if (state.level_populations(ion)[bracket_l] > 1e-12)
            throw std::runtime_error("apply_drive: ion " + std::to_string(ion) +
                                     " has population in the bracket state; repump first");

        if (pulse.kind == PulseKind::mw_pi || pulse.kind == PulseKind::mw_pi_half ||
            pulse.kind == PulseKind::raman_two_tone) {
            const int a = level_index(pulse.from);
            const int b = level_index(pulse.to);
            double p;
            if (pulse.rabi_hz == 0.0 && pulse.duration_s == 0.0) {
                p = pulse.kind == PulseKind::mw_pi_half ? 0.5 : 1.0;
            } else {
                const double omega = constants::two_pi * pulse.rabi_hz;
                const double delta = constants::two_pi * pulse.detuning_hz;
                const double x2 = omega * omega + delta * delta;
                const double sn = std::sin(0.5 * std::sqrt(x2) * pulse.duration_s);
                p = x2 == 0.0 ? 0.0 : (omega * omega / x2) * sn * sn;
            }
            p *= pulse.transfer_scale;
            if (ion == state.joint_ion) {
                const Eigen::RowVectorXd ra = state.joint.row(a);
                const Eigen::RowVectorXd rb = state.joint.row(b);
                state.joint.row(a) += p * (rb - ra);
                state.joint.row(b) += p * (ra - rb);
            } else {
                auto& v = state.others[ion < state.joint_ion ? ion : ion - 1];
                const double pa = v[a], pb = v[b];
                v[a] += p * (pb - pa);
                v[b] += p * (pa - pb);
            }
            continue;
        }

        // quadrupole drive
        if (ion == state.joint_ion) {
            Eigen::MatrixXd next = state.joint;
            for (int l = 0; l < kNumLevels; ++l) {
                if (l == bracket_l) continue;
                for (int n = 0; n <= state.n_max; ++n) {
                    const double mass = state.joint(l, n);
                    if (mass <= 0.0) continue;
                    std::vector<int> fock{n};
                    const auto channels = quadrupole_channels(l, pulse, fock, occ, ion);
                    double stay = 1.0;
                    for (const auto& ch : channels) {
                        const double p =
                            pulse.transfer_scale * channel_probability(ch, pulse.duration_s);
                        if (p < kProbFloor) continue;
                        const double w = stay * p;
                        stay *= 1.0 - p;
                        const int n2 =
                            std::min(state.n_max, n + (ch.mode >= 0 ? ch.fock_delta : 0));
                        next(l, n) -= w * mass;
                        next(ch.to_label, n2) += w * mass;
                    }
                }
            }
            state.joint = next;
        } else {
            // Factorized data ion: average the (tiny, off-resonant) transfer
            // probabilities over the current Fock marginal.
            auto& v = state.others[ion < state.joint_ion ? ion : ion - 1];
            const Eigen::VectorXd marg = state.fock_distribution(0);
            Eigen::VectorXd next = v;
            for (int l = 0; l < kNumLevels; ++l) {
                if (l == bracket_l || v[l] <= 0.0) continue;
                Eigen::VectorXd dest = Eigen::VectorXd::Zero(kNumLevels);
                for (int n = 0; n <= state.n_max; ++n) {
                    if (marg[n] <= 0.0) continue;
                    std::vector<int> fock{n};
                    const auto channels = quadrupole_channels(l, pulse, fock, occ, ion);
                    double stay = 1.0;
                    for (const auto& ch : channels) {
                        const double p =
                            pulse.transfer_scale * channel_probability(ch, pulse.duration_s);
                        if (p < kProbFloor) continue;
                        dest[ch.to_label] += marg[n] * stay * p;
                        stay *= 1.0 - p;
                    }
                }
                const double moved = dest.sum();
                next[l] -= v[l] * moved;
                next += v[l] * dest;
            }
            v = next;
        }
    }
}

void PulseEngine::apply_drive(SystemState& state, const PulseSpec& pulse) const {
    pulse.validate(modes_.n_ions, modes_.n_tracked());
    if (pulse.kind == PulseKind::repump || pulse.kind == PulseKind::idle)
        throw std::invalid_argument("apply_drive: not a coherent drive pulse");
    if (state.backend == Backend::monte_carlo) {
        parallel_trajectories(state.traj, state.threads,
                              [&](Trajectory& t) { drive_trajectory(t, pulse); });
    } else {
        drive_rate(state, pulse);
    }
}

void PulseEngine::resample_axial(Trajectory& t) const {
    for (int a = 0; a < modes_.n_axial(); ++a)
        t.axial_n[a] = t.rng.thermal_fock(modes_.axial_nbar[a]);
}

void PulseEngine::repump_trajectory(Trajectory& t) const {
    for (int i = 0; i < modes_.n_ions; ++i) {
        const InternalState s = level_from_index(t.internal[i]);
        if (s.manifold != Manifold::D && s.manifold != Manifold::Bracket) continue;
        const auto branches = s.manifold == Manifold::D
                                  ? repump_branching(s, levels_)
                                  : repump_branching(d_state(0), levels_);
        const double u = t.rng.uniform();
        double acc = 0.0;
        for (const auto& [dest, p] : branches) {
            acc += p;
            if (u < acc) {
                t.internal[i] = level_index(dest);
                break;
            }
        }
        if (params_.repump_recoil) {
            for (int ev = 0; ev < params_.repump_scatter_events; ++ev) {
                for (int m = 0; m < modes_.n_tracked(); ++m) {
                    const double e2 = modes_.eta(i, m) * modes_.eta(i, m);
                    const int n = t.fock[m];
                    const double up = e2 * (n + 1.0), down = e2 * n;
                    const double u2 = t.rng.uniform();
                    if (u2 < up)
                        t.fock[m] = std::min(params_.n_max, n + 1);
                    else if (u2 < up + down)
                        t.fock[m] = n - 1;
                }
            }
        }
    }
    // the repump's scattering re-randomizes the hot axial bath
    resample_axial(t);
}

void PulseEngine::apply_repump(SystemState& state, const PulseSpec& pulse) const {
    if (pulse.kind != PulseKind::repump)
        throw std::invalid_argument("apply_repump: pulse kind must be repump");
    if (state.backend == Backend::monte_carlo) {
        parallel_trajectories(state.traj, state.threads,
                              [&](Trajectory& t) { repump_trajectory(t); });
        return;
    }

    const auto branches = repump_branching(d_state(0), levels_);
    auto branch_rows = [&](Eigen::MatrixXd& table, int ion) {
        Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(state.n_max + 1);
        for (int mf = -1; mf <= 1; ++mf) {
            const int l = level_index(d_state(mf));
            pooled += table.row(l);
            table.row(l).setZero();
        }
        pooled += table.row(level_index(bracket_state()));
        table.row(level_index(bracket_state())).setZero();
        if (params_.repump_recoil) {
            for (int ev = 0; ev < params_.repump_scatter_events; ++ev) {
                Eigen::RowVectorXd next = pooled;
                const double e2 = modes_.eta(ion, 0) * modes_.eta(ion, 0);
                for (int n = 0; n <= state.n_max; ++n) {
                    const double up = e2 * (n + 1.0), down = e2 * n;
                    next[n] -= pooled[n] * (up + down);
                    if (n + 1 <= state.n_max) next[n + 1] += pooled[n] * up;
                    if (n >= 1) next[n - 1] += pooled[n] * down;
                }
                pooled = next;
            }
        }
        for (const auto& [dest, p] : branches)
            table.row(level_index(dest)) += p * pooled;
    };
    branch_rows(state.joint, state.joint_ion);

    for (int i = 0, k = 0; i < state.n_ions; ++i) {
        if (i == state.joint_ion) continue;
        auto& v = state.others[k++];
        double pooled = v[level_index(bracket_state())];
        v[level_index(bracket_state())] = 0.0;
        for (int mf = -1; mf <= 1; ++mf) {
            pooled += v[level_index(d_state(mf))];
            v[level_index(d_state(mf))] = 0.0;
        }
        for (const auto& [dest, p] : branches) v[level_index(dest)] += p * pooled;
    }
}

void PulseEngine::apply(SystemState& state, const PulseSpec& pulse) const {
    switch (pulse.kind) {
        case PulseKind::repump: apply_repump(state, pulse); break;
        case PulseKind::idle: break;
        default: apply_drive(state, pulse); break;
    }
}

void PulseEngine::heating_step(SystemState& state, double dt,
                               const HeatingModel& model) const {
    if (dt < 0) throw std::invalid_argument("heating_step: dt must be >= 0");
    if (static_cast<int>(model.rate_qps.size()) != modes_.n_tracked())
        throw std::invalid_argument("heating_step: one rate per tracked mode");
    for (double g : model.rate_qps)
        if (g < 0) throw std::invalid_argument("heating_step: rates must be >= 0");
    if (dt == 0.0) return;

    if (state.backend == Backend::monte_carlo) {
        const int n_max = params_.n_max;
        parallel_trajectories(state.traj, state.threads, [&](Trajectory& t) {
            for (int m = 0; m < modes_.n_tracked(); ++m) {
                const double g = model.rate_qps[m];
                if (g == 0.0) continue;
                double remaining = dt;
                int n = t.fock[m];
                while (true) {
                    // reflecting truncation boundary, as in the rate generator
                    const double up = n < n_max ? g * (n + 1.0) : 0.0;
                    const double down = g * n;
                    if (up + down == 0.0) break;
                    const double tau = t.rng.exponential(up + down);
                    if (tau > remaining) break;
                    remaining -= tau;
                    if (t.rng.uniform() < up / (up + down))
                        ++n;
                    else
                        --n;
                }
                t.fock[m] = n;
            }
        });
        check_leakage(state);
        return;
    }

    const double g = model.rate_qps[0];
    if (g == 0.0) return;
    const int nm = state.n_max;
    const int steps = std::max(1, static_cast<int>(std::ceil(dt * 20.0 * g * nm)));
    const double h = dt / steps;
    Eigen::RowVectorXd row(nm + 1), next(nm + 1);
    for (int l = 0; l < kNumLevels; ++l) {
        row = state.joint.row(l);
        if (row.sum() <= 0.0) continue;
        for (int s = 0; s < steps; ++s) {
            next = row;
            for (int n = 0; n <= nm; ++n) {
                const double up = (n < nm) ? g * (n + 1.0) : 0.0;
                const double down = g * n;
                next[n] -= h * (up + down) * row[n];
                if (n < nm) next[n + 1] += h * up * row[n];
                if (n >= 1) next[n - 1] += h * down * row[n];
            }
            row = next;
        }
        state.joint.row(l) = row;
    }
    check_leakage(state);
}

void PulseEngine::check_leakage(const SystemState& state) const {
    double top = 0.0;
    if (state.backend == Backend::rate) {
        top = state.joint.col(state.n_max).sum() +
              state.joint.col(state.n_max - 1).sum();
    } else {
        if (state.traj.empty() || modes_.n_tracked() == 0) return;
        int flagged = 0;
        for (const auto& t : state.traj)
            for (int m = 0; m < modes_.n_tracked(); ++m)
                if (t.fock[m] >= params_.n_max - 1) {
                    ++flagged;
                    break;
                }
        top = flagged / static_cast<double>(state.traj.size());
    }
    if (top > params_.leakage_tolerance)
        throw std::runtime_error(
            "Fock truncation leakage " + std::to_string(top) + " exceeds tolerance " +
            std::to_string(params_.leakage_tolerance) + "; raise engine.n_max");
}

}  // namespace zcool
