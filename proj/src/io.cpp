#include "rotlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rotlab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  if (rows == 0) throw std::invalid_argument("empty matrix in json");
  const auto cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.empty()) throw std::invalid_argument("csv header missing: " + path);
  const bool has_weight = header.back() == "weight";
  const int d = static_cast<int>(header.size()) - (has_weight ? 1 : 0);
  if (d < 1) throw std::invalid_argument("csv has no coordinate columns: " + path);

  std::vector<std::vector<double>> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    std::vector<double> row;
    for (const auto& f : fields) {
      size_t pos = 0;
      double v;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad number '" + f +
                                    "'");
      }
      if (pos != f.size())
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad number '" + f +
                                    "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("csv has no data rows: " + path);

  Eigen::MatrixXd pts(rows.size(), d);
  Eigen::VectorXd w(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < d; ++k) pts(i, k) = rows[i][k];
    w[i] = has_weight ? rows[i][d] : 1.0 / static_cast<double>(rows.size());
  }
  if (has_weight) {
    const double total = w.sum();
    if (total <= 0.0) throw std::invalid_argument("csv weights must have positive total");
    w /= total;
  }
  return DiscreteMeasure::make(std::move(pts), std::move(w));
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& measure) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write csv: " + path);
  for (int k = 0; k < measure.dim(); ++k) out << "x" << k << ",";
  out << "weight\n";
  for (int i = 0; i < measure.size(); ++i) {
    for (int k = 0; k < measure.dim(); ++k) out << fmt(measure.points(i, k)) << ",";
    out << fmt(measure.weights[i]) << "\n";
  }
}

nlohmann::json solution_to_json(const Solution& sol, bool include_diagnostics) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["epsilon"] = sol.epsilon;
  j["divergence"] = sol.divergence.encode();
  j["cost"] = {{"kind", sol.cost_spec.encode()}, {"dim", sol.cost_spec.dim}};
  j["p"] = {{"points", matrix_to_json(sol.p.points)}, {"weights", vector_to_json(sol.p.weights)}};
  j["q"] = {{"points", matrix_to_json(sol.q.points)}, {"weights", vector_to_json(sol.q.weights)}};
  j["cost_matrix"] = matrix_to_json(sol.cost.values);
  j["f"] = vector_to_json(sol.f);
  j["g"] = vector_to_json(sol.g);
  j["coupling"] = matrix_to_json(sol.coupling());
  j["primal_value"] = sol.primal_value;
  j["dual_value"] = sol.dual_value;
  j["residual"] = sol.residual;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  if (include_diagnostics) {
    const auto diag = diagnostics(sol);
    j["diagnostics"] = {{"delta_min", diag.delta_min},
                        {"support_fraction", diag.support_fraction},
                        {"positivity_fraction", diag.positivity_fraction},
                        {"duality_gap", sol.certificates.duality_gap},
                        {"max_dual_decrease", sol.certificates.max_dual_decrease},
                        {"max_oscillation_excess", sol.certificates.max_oscillation_excess},
                        {"sup_norm_excess", sol.certificates.sup_norm_excess},
                        {"max_root_residual", sol.certificates.max_root_residual}};
  }
  return j;
}

Solution solution_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::invalid_argument("unsupported solution format_version");
  DiscreteMeasure p = DiscreteMeasure::make(matrix_from_json(j.at("p").at("points")),
                                            vector_from_json(j.at("p").at("weights")));
  DiscreteMeasure q = DiscreteMeasure::make(matrix_from_json(j.at("q").at("points")),
                                            vector_from_json(j.at("q").at("weights")));
  CostSpec spec = CostSpec::parse(j.at("cost").at("kind").get<std::string>(),
                                  j.at("cost").at("dim").get<int>());
  CostMatrix cost;
  cost.values = matrix_from_json(j.at("cost_matrix"));
  cost.max_abs = cost.values.cwiseAbs().maxCoeff();
  Solution sol{std::move(p),
               std::move(q),
               spec,
               std::move(cost),
               Divergence::parse(j.at("divergence").get<std::string>()),
               j.at("epsilon").get<double>(),
               vector_from_json(j.at("f")),
               vector_from_json(j.at("g"))};
  sol.primal_value = j.at("primal_value").get<double>();
  sol.dual_value = j.at("dual_value").get<double>();
  sol.residual = j.at("residual").get<double>();
  sol.iterations = j.at("iterations").get<int>();
  sol.converged = j.at("converged").get<bool>();
  return sol;
}

nlohmann::json clt_report_to_json(const CltReport& report) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["epsilon"] = report.epsilon;
  j["n"] = report.n;
  j["m"] = report.m;
  switch (report.kind) {
    case CltKind::Cost:
      j["kind"] = "cost";
      j["sigma2"] = report.sigma2;
      break;
    case CltKind::Coupling:
      j["kind"] = "coupling";
      j["sigma2"] = report.sigma2;
      j["eta_hash"] = report.eta_hash;
      break;
    case CltKind::Potential:
      j["kind"] = "potential";
      j["covariance"] = matrix_to_json(report.covariance);
      break;
  }
  return j;
}

nlohmann::json torus_population_to_json(const TorusPopulation& pop) {
  return nlohmann::json{{"format_version", 1},
                        {"d", pop.d},
                        {"epsilon", pop.epsilon},
                        {"divergence", pop.divergence.encode()},
                        {"C", pop.constant},
                        {"rot_value", pop.rot_value},
                        {"quadrature", pop.quadrature.describe()},
                        {"quadrature_error_estimate", pop.quadrature_error_estimate}};
}

void write_rate_csv(const std::string& path, const std::vector<RateRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write csv: " + path);
  out << "divergence,d,epsilon,n,rep,seed,rot_emp,rot_pop,abs_err,solve_iters,residual\n";
  for (const auto& r : records) {
    out << r.divergence << "," << r.d << "," << fmt(r.epsilon) << "," << r.n << "," << r.rep
        << "," << r.seed << "," << fmt(r.rot_emp) << "," << fmt(r.rot_pop) << ","
        << fmt(r.abs_err) << "," << r.solve_iters << "," << fmt(r.residual) << "\n";
  }
}

std::vector<RateRecord> read_rate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty csv: " + path);
  std::vector<RateRecord> records;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 11)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 11 columns");
    RateRecord r;
    try {
      r.divergence = f[0];
      r.d = std::stoi(f[1]);
      r.epsilon = std::stod(f[2]);
      r.n = std::stoi(f[3]);
      r.rep = std::stoi(f[4]);
      r.seed = std::stoull(f[5]);
      r.rot_emp = std::stod(f[6]);
      r.rot_pop = std::stod(f[7]);
      r.abs_err = std::stod(f[8]);
      r.solve_iters = std::stoi(f[9]);
      r.residual = std::stod(f[10]);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    records.push_back(std::move(r));
  }
  return records;
}

nlohmann::json slope_fit_to_json(const SlopeFit& fit) {
  nlohmann::json means = nlohmann::json::object();
  for (const auto& [n, mean] : fit.per_n_means) means[std::to_string(n)] = mean;
  return nlohmann::json{{"format_version", 1},
                        {"alpha", fit.alpha},
                        {"intercept", fit.intercept},
                        {"stderr", fit.stderr_alpha},
                        {"per_n_means", means}};
}

}  // namespace rotlab
