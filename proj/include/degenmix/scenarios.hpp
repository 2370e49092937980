#pragma once

#include <string>

#include "degenmix/config.hpp"
#include "degenmix/coupling.hpp"
#include "degenmix/mixing.hpp"
#include "degenmix/report.hpp"
#include "degenmix/saturation.hpp"

namespace degenmix {

// Typed builders from the validated config tree.
ModelParams model_from_config(const Json& cfg);
TorusSpec torus_from_config(const Json& cfg, int dims);
SolverConfig solver_from_config(const Json& cfg, const ModelParams& params);
NoiseSpec noise_from_config(const Json& cfg, const ModelParams& params, const TorusSpec& torus,
                            int cutoff);

struct ScenarioResult {
  ReportBundle bundle;
};

ScenarioResult scenario_observability(const Json& cfg, RngKey key, int threads);
ScenarioResult scenario_smallball(const Json& cfg, RngKey key, int threads);
ScenarioResult scenario_saturate(const Json& cfg, RngKey key, int threads);
ScenarioResult scenario_gramian(const Json& cfg, RngKey key, int threads);
ScenarioResult scenario_couple(const Json& cfg, RngKey key, int threads);
ScenarioResult scenario_mixing(const Json& cfg, RngKey key, int threads);

// Full pipeline: dispatch on cfg["scenario"], write the report bundle.
// Returns the process exit code: 0 all verdicts pass, 1 verdict failure,
// 2 schema violation, 3 runtime failure (partial manifest written).
int run_experiment(Json cfg, const std::string& out_override, int threads_override);

}  // namespace degenmix
