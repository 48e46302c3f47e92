#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rotlab/experiments.hpp"
#include "rotlab/geometry.hpp"
#include "rotlab/inference.hpp"
#include "rotlab/solver.hpp"
#include "rotlab/torus_oracle.hpp"

namespace rotlab {

// CSV point clouds: header row, d coordinate columns, optional trailing
// "weight" column (uniform weights when absent).
DiscreteMeasure read_measure_csv(const std::string& path);
void write_measure_csv(const std::string& path, const DiscreteMeasure& measure);

// Solution round-trip. The JSON carries everything the estimators consume
// (marginals, cost matrix, potentials, values) plus the coupling with
// explicit zeros.
nlohmann::json solution_to_json(const Solution& sol, bool include_diagnostics = false);
Solution solution_from_json(const nlohmann::json& j);

nlohmann::json clt_report_to_json(const CltReport& report);
nlohmann::json torus_population_to_json(const TorusPopulation& pop);

// Rate records: columns exactly
// divergence,d,epsilon,n,rep,seed,rot_emp,rot_pop,abs_err,solve_iters,residual
void write_rate_csv(const std::string& path, const std::vector<RateRecord>& records);
std::vector<RateRecord> read_rate_csv(const std::string& path);

nlohmann::json slope_fit_to_json(const SlopeFit& fit);

}  // namespace rotlab
