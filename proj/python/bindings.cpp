#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rotlab/experiments.hpp"
#include "rotlab/inference.hpp"
#include "rotlab/linearization.hpp"
#include "rotlab/solver.hpp"
#include "rotlab/torus_oracle.hpp"

namespace py = pybind11;
using namespace rotlab;

namespace {

DiscreteMeasure make_measure(const Eigen::MatrixXd& points,
                             const std::optional<Eigen::VectorXd>& weights) {
  if (weights) return DiscreteMeasure::make(points, *weights);
  return DiscreteMeasure::uniform(points);
}

Solution solve_py(const Eigen::MatrixXd& p_points, const std::optional<Eigen::VectorXd>& p_weights,
                  const Eigen::MatrixXd& q_points, const std::optional<Eigen::VectorXd>& q_weights,
                  const std::string& cost, const std::string& divergence, double epsilon,
                  double tol, int max_iter) {
  auto p = make_measure(p_points, p_weights);
  auto q = make_measure(q_points, q_weights);
  CostSpec spec = CostSpec::parse(cost, p.dim());
  if (spec.kind == CostKind::TorusSqDist) {
    p.points = wrap_to_unit_torus(p.points);
    q.points = wrap_to_unit_torus(q.points);
  }
  SolveOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve(p, q, spec, Divergence::parse(divergence), epsilon, opts);
}

}  // namespace

PYBIND11_MODULE(_rotlab, m) {
  m.doc() = "divergence-regularized optimal transport on discrete marginals";

  py::register_exception<NoConvergence>(m, "NoConvergence");
  py::register_exception<SingularSystem>(m, "SingularSystem");
  py::register_exception<DegenerateDenominator>(m, "DegenerateDenominator");
  py::register_exception<QuadratureTooCoarse>(m, "QuadratureTooCoarse");

  py::class_<Divergence>(m, "Divergence")
      .def_static("parse", &Divergence::parse, py::arg("text"))
      .def("psi", &Divergence::psi, py::arg("t"), py::arg("order") = 0)
      .def("phi", &Divergence::phi, py::arg("t"))
      .def_property_readonly("t0", &Divergence::t0)
      .def_property_readonly("alpha", &Divergence::alpha)
      .def_property_readonly("beta", &Divergence::beta)
      .def_property_readonly("outside_c2_class", &Divergence::outside_c2_class)
      .def("__repr__", [](const Divergence& d) { return "Divergence(" + d.encode() + ")"; })
      .def("encode", &Divergence::encode);

  py::class_<DiscreteMeasure>(m, "Measure")
      .def_property_readonly("points", [](const DiscreteMeasure& d) { return d.points; })
      .def_property_readonly("weights", [](const DiscreteMeasure& d) { return d.weights; })
      .def("coalesced", &DiscreteMeasure::coalesced)
      .def("__len__", &DiscreteMeasure::size);

  py::class_<SolveCertificates>(m, "Certificates")
      .def_readonly("duality_gap", &SolveCertificates::duality_gap)
      .def_readonly("max_dual_decrease", &SolveCertificates::max_dual_decrease)
      .def_readonly("max_oscillation_excess", &SolveCertificates::max_oscillation_excess)
      .def_readonly("sup_norm_excess", &SolveCertificates::sup_norm_excess)
      .def_readonly("max_root_residual", &SolveCertificates::max_root_residual);

  py::class_<Solution>(m, "Solution")
      .def_property_readonly("f", [](const Solution& s) { return s.f; })
      .def_property_readonly("g", [](const Solution& s) { return s.g; })
      .def("coupling", &Solution::coupling)
      .def_readonly("primal_value", &Solution::primal_value)
      .def_readonly("dual_value", &Solution::dual_value)
      .def_readonly("epsilon", &Solution::epsilon)
      .def_readonly("residual", &Solution::residual)
      .def_readonly("iterations", &Solution::iterations)
      .def_readonly("converged", &Solution::converged)
      .def_readonly("certificates", &Solution::certificates)
      .def_property_readonly("p", [](const Solution& s) { return s.p; })
      .def_property_readonly("q", [](const Solution& s) { return s.q; })
      .def_property_readonly("cost_matrix", [](const Solution& s) { return s.cost.values; });

  m.def("solve", &solve_py, py::arg("p_points"), py::arg("p_weights"), py::arg("q_points"),
        py::arg("q_weights"), py::arg("cost") = "sqeuclidean", py::arg("divergence") = "kl",
        py::arg("epsilon") = 1.0, py::arg("tol") = 1e-10, py::arg("max_iter") = 10000,
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "extend_potential",
      [](const Solution& sol, const std::string& side, const Eigen::MatrixXd& points) {
        if (side != "p" && side != "q") throw std::invalid_argument("side must be 'p' or 'q'");
        return extend_potential(sol, side == "p" ? Side::P : Side::Q, points);
      },
      py::arg("solution"), py::arg("side"), py::arg("points"));

  m.def("sample_uniform_torus", &sample_uniform_torus, py::arg("d"), py::arg("n"),
        py::arg("seed"));
  m.def("sample_from_discrete", &sample_from_discrete, py::arg("population"), py::arg("n"),
        py::arg("seed"));

  m.def(
      "diagnostics",
      [](const Solution& sol) {
        const auto d = diagnostics(sol);
        return py::dict(py::arg("delta_min") = d.delta_min,
                        py::arg("support_fraction") = d.support_fraction,
                        py::arg("positivity_fraction") = d.positivity_fraction);
      },
      py::arg("solution"));

  m.def(
      "cost_clt_variance",
      [](const Solution& sol) { return cost_clt_variance(sol).sigma2; }, py::arg("solution"));
  m.def(
      "coupling_clt_variance",
      [](const Solution& sol, const Eigen::MatrixXd& eta) {
        return coupling_clt_variance(sol, eta).sigma2;
      },
      py::arg("solution"), py::arg("eta"));
  m.def(
      "potential_clt_covariance",
      [](const Solution& sol) { return potential_clt_covariance(sol).covariance; },
      py::arg("solution"));

  m.def(
      "torus_population",
      [](int d, double epsilon, const std::string& divergence) {
        const auto pop = make_torus_population(d, epsilon, Divergence::parse(divergence));
        return py::dict(py::arg("d") = pop.d, py::arg("epsilon") = pop.epsilon,
                        py::arg("divergence") = pop.divergence.encode(),
                        py::arg("C") = pop.constant, py::arg("rot_value") = pop.rot_value,
                        py::arg("quadrature") = pop.quadrature.describe(),
                        py::arg("quadrature_error_estimate") = pop.quadrature_error_estimate);
      },
      py::arg("d"), py::arg("epsilon"), py::arg("divergence"));

  m.def(
      "run_rate_experiment",
      [](int d, double epsilon, const std::string& divergence, const std::vector<int>& ns,
         int reps, uint64_t seed) {
        RateExperimentConfig config;
        config.d = d;
        config.epsilon = epsilon;
        config.divergence = Divergence::parse(divergence);
        config.ns = ns;
        config.reps = reps;
        config.base_seed = seed;
        const auto records = run_rate_experiment(config);
        py::list out;
        for (const auto& r : records) {
          out.append(py::dict(py::arg("n") = r.n, py::arg("rep") = r.rep,
                              py::arg("seed") = r.seed, py::arg("rot_emp") = r.rot_emp,
                              py::arg("rot_pop") = r.rot_pop, py::arg("abs_err") = r.abs_err,
                              py::arg("solve_iters") = r.solve_iters,
                              py::arg("residual") = r.residual));
        }
        return out;
      },
      py::arg("d"), py::arg("epsilon"), py::arg("divergence"), py::arg("ns"), py::arg("reps"),
      py::arg("seed"));

  m.attr("__version__") = "0.1.0";
}
