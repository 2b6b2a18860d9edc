#pragma once

#include "zcool/config.hpp"
#include "zcool/io.hpp"

namespace zcool {

// Each command produces its result files plus a run manifest
// (resolved config, seed, tool version, wall time) for reproducibility.
CommandResult run_modes(const RunConfig& cfg);
CommandResult run_cool(const RunConfig& cfg);
CommandResult run_suppress(const RunConfig& cfg);
CommandResult run_sweep_cmd(const RunConfig& cfg);
CommandResult run_scan(const RunConfig& cfg);
CommandResult run_probe(const RunConfig& cfg);
CommandResult run_coherence(const RunConfig& cfg);
CommandResult run_allan(const RunConfig& cfg, const NoiseTrace& trace);
CommandResult run_scatter(const RunConfig& cfg);

NoiseTrace read_trace_csv(const std::string& path);

}  // namespace zcool
