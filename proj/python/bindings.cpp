#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rtip/critical.hpp"
#include "rtip/pullback.hpp"
#include "rtip/spectrum.hpp"

namespace py = pybind11;
using namespace rtip;

namespace {

PulseKind kind_from_name(const std::string& name) {
  if (name == "stable") return PulseKind::stable;
  if (name == "unstable") return PulseKind::unstable;
  if (name == "trivial") return PulseKind::trivial;
  throw InvalidParameter("pulse kind must be stable, unstable, or trivial");
}

}  // namespace

PYBIND11_MODULE(_rtip, m) {
  m.doc() = "Critical rates of habitat shift in a bistable reaction-diffusion "
            "model";

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("beta", &ModelParams::beta)
      .def_readwrite("lambda_r", &ModelParams::lambda_r)
      .def_readwrite("L", &ModelParams::L)
      .def_readwrite("a", &ModelParams::a)
      .def_readwrite("r", &ModelParams::r)
      .def_readwrite("Z", &ModelParams::Z)
      .def_readwrite("tol_bvp", &ModelParams::tol_bvp)
      .def_readwrite("tol_ode", &ModelParams::tol_ode)
      .def_readwrite("tol_newton", &ModelParams::tol_newton)
      .def("validate", &ModelParams::validate)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(beta=" + std::to_string(p.beta) +
               ", a=" + std::to_string(p.a) + ", r=" + std::to_string(p.r) +
               ")";
      });

  m.def("habitat", &habitat, py::arg("x"), py::arg("L"));
  m.def("shift_velocity", &shift_velocity, py::arg("gamma"), py::arg("a"));
  m.def("ramp", &ramp, py::arg("t"), py::arg("r"), py::arg("a"));

  py::class_<PulseProfile>(m, "PulseProfile")
      .def_property_readonly("z", [](const PulseProfile& p) { return p.z; })
      .def_property_readonly("u", [](const PulseProfile& p) { return p.u; })
      .def_property_readonly("v", [](const PulseProfile& p) { return p.v; })
      .def_readonly("xi", &PulseProfile::xi)
      .def("eval_u", &PulseProfile::eval_u, py::arg("z"))
      .def("max_u", [](const PulseProfile& p) { return p.u.maxCoeff(); });

  m.def(
      "compute_pulse",
      [](const std::string& kind, const ModelParams& p) {
        return compute_pulse(kind_from_name(kind), p);
      },
      py::arg("kind"), py::arg("params") = ModelParams{},
      py::call_guard<py::gil_scoped_release>());

  py::class_<PointwiseOrder>(m, "PointwiseOrder")
      .def_readonly("min_gap", &PointwiseOrder::min_gap)
      .def_readonly("argmin_z", &PointwiseOrder::argmin_z)
      .def_readonly("interior_min_gap", &PointwiseOrder::interior_min_gap)
      .def_readonly("verdict", &PointwiseOrder::verdict);
  m.def("pointwise_order", &pointwise_order, py::arg("upper"),
        py::arg("lower"));

  py::class_<SpectrumReport>(m, "SpectrumReport")
      .def_readonly("ess_boundary", &SpectrumReport::ess_boundary)
      .def_readonly("eigenvalues", &SpectrumReport::eigenvalues)
      .def_readonly("indices", &SpectrumReport::indices)
      .def_readonly("h2", &SpectrumReport::h2)
      .def_readonly("h3", &SpectrumReport::h3)
      .def_readonly("h4", &SpectrumReport::h4);
  m.def("find_eigenvalues", &find_eigenvalues, py::arg("pulse"),
        py::arg("lambda_lo") = std::numeric_limits<double>::quiet_NaN(),
        py::arg("lambda_hi") = 0.5, py::arg("n_scan") = 400,
        py::arg("cross_check") = true,
        py::call_guard<py::gil_scoped_release>());

  py::enum_<Classification>(m, "Classification")
      .value("tracking", Classification::tracking)
      .value("extinct", Classification::extinct)
      .value("undetermined", Classification::undetermined);

  py::class_<PullbackDiagnostics>(m, "PullbackDiagnostics")
      .def_readonly("dist_end", &PullbackDiagnostics::dist_end)
      .def_readonly("norm_end", &PullbackDiagnostics::norm_end)
      .def_readonly("sup_error", &PullbackDiagnostics::sup_error)
      .def_readonly("sup_error_time", &PullbackDiagnostics::sup_error_time);

  py::class_<Trajectory>(m, "Trajectory")
      .def("times", &Trajectory::times)
      .def("t_begin", &Trajectory::t_begin)
      .def("t_end", &Trajectory::t_end)
      .def("__len__", &Trajectory::size)
      .def("state", [](const Trajectory& tr, int i) { return tr.state(i); },
           py::arg("i"))
      .def(
          "eval",
          [](const Trajectory& tr, double t) {
            VectorXd y(tr.state(0).size());
            tr.eval(t, y);
            return y;
          },
          py::arg("t"));

  py::class_<PullbackRun>(m, "PullbackRun")
      .def_readonly("params", &PullbackRun::params)
      .def_readonly("T_L", &PullbackRun::T_L)
      .def_readonly("t_end", &PullbackRun::t_end)
      .def_readonly("delta1", &PullbackRun::delta1)
      .def_readonly("delta2", &PullbackRun::delta2)
      .def_readonly("classification", &PullbackRun::classification)
      .def_readonly("trajectory", &PullbackRun::trajectory)
      .def_readonly("diagnostics", &PullbackRun::diagnostics);

  py::class_<PullbackEngine>(m, "PullbackEngine")
      .def(py::init<const ModelParams&>(), py::arg("base") = ModelParams{},
           py::call_guard<py::gil_scoped_release>())
      .def("run", &PullbackEngine::run, py::arg("params"),
           py::arg("t_end") = 1000.0,
           py::call_guard<py::gil_scoped_release>())
      .def("tracking_error", &PullbackEngine::tracking_error,
           py::arg("params"), py::arg("t_end") = 1000.0,
           py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("delta1", &PullbackEngine::delta1)
      .def_property_readonly("delta2", &PullbackEngine::delta2);

  py::class_<CriticalRateResult>(m, "CriticalRateResult")
      .def_readonly("d", &CriticalRateResult::d)
      .def_readonly("r_lo", &CriticalRateResult::r_lo)
      .def_readonly("r_hi", &CriticalRateResult::r_hi)
      .def_readonly("r_c", &CriticalRateResult::r_c)
      .def_readonly("miss_slope", &CriticalRateResult::miss_slope)
      .def_readonly("history", &CriticalRateResult::history);

  py::class_<HeteroclinicSolution>(m, "HeteroclinicSolution")
      .def_readonly("r_c", &HeteroclinicSolution::r_c)
      .def_readonly("T", &HeteroclinicSolution::T)
      .def_readonly("t_match", &HeteroclinicSolution::t_match)
      .def_readonly("miss", &HeteroclinicSolution::miss)
      .def_readonly("miss_slope", &HeteroclinicSolution::miss_slope)
      .def_readonly("residual_minus", &HeteroclinicSolution::residual_minus)
      .def_readonly("residual_plus", &HeteroclinicSolution::residual_plus)
      .def_readonly("gamma0_residual", &HeteroclinicSolution::gamma0_residual)
      .def_readonly("trajectory", &HeteroclinicSolution::trajectory);

  py::class_<DiagramEntry>(m, "DiagramEntry")
      .def_readonly("d", &DiagramEntry::d)
      .def_readonly("tipping", &DiagramEntry::tipping)
      .def_readonly("result", &DiagramEntry::result)
      .def_readonly("error", &DiagramEntry::error);

  py::class_<TippingDiagram>(m, "TippingDiagram")
      .def_readonly("entries", &TippingDiagram::entries)
      .def_readonly("r_max", &TippingDiagram::r_max)
      .def_readonly("tol_r", &TippingDiagram::tol_r);

  py::class_<CriticalSolver>(m, "CriticalSolver")
      .def(py::init<const ModelParams&>(), py::arg("base") = ModelParams{},
           py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("edge_eigenvalue",
                             &CriticalSolver::edge_eigenvalue)
      .def("miss", &CriticalSolver::miss, py::arg("params"),
           py::arg("rtol") = 0.0, py::call_guard<py::gil_scoped_release>())
      .def("bisect_rc", &CriticalSolver::bisect_rc, py::arg("params"),
           py::arg("r_lo"), py::arg("r_hi"), py::arg("tol_r"),
           py::call_guard<py::gil_scoped_release>())
      .def("refine_heteroclinic", &CriticalSolver::refine_heteroclinic,
           py::arg("params"), py::arg("r_init"),
           py::call_guard<py::gil_scoped_release>())
      .def("transversality", &CriticalSolver::transversality, py::arg("het"),
           py::arg("params"), py::arg("t_var") = 0.0, py::arg("dr0") = 1.0,
           py::call_guard<py::gil_scoped_release>())
      .def("sweep_diagram", &CriticalSolver::sweep_diagram,
           py::arg("d_values"), py::arg("r_max"), py::arg("tol_r"),
           py::arg("workers") = 0, py::call_guard<py::gil_scoped_release>());
}
