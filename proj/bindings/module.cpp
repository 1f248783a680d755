#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cdjp/config.hpp"

namespace py = pybind11;
using namespace cdjp;

PYBIND11_MODULE(_core, m) {
    m.doc() = "most-likely-path optimal control for continuously monitored oscillators";

    py::register_exception<Error>(m, "CdjpError", PyExc_RuntimeError);

    py::class_<FockDim>(m, "FockDim")
        .def(py::init<int>(), py::arg("n_levels") = 36)
        .def_readonly("n_levels", &FockDim::n_levels);

    py::class_<OperatorSet>(m, "OperatorSet")
        .def_readonly("dim", &OperatorSet::dim)
        .def_readonly("a", &OperatorSet::a)
        .def_readonly("x", &OperatorSet::x)
        .def_readonly("p", &OperatorSet::p)
        .def_readonly("x2", &OperatorSet::x2)
        .def_readonly("p2", &OperatorSet::p2)
        .def_readonly("x3", &OperatorSet::x3)
        .def_readonly("xp_sym", &OperatorSet::xp_sym);

    m.def("build_operators", [](int n) { return build_operators(FockDim(n)); },
          py::arg("n_levels") = 36);
    m.def("quadratures", &quadratures, py::arg("ops"), py::arg("theta"));
    m.def("hamiltonian", &hamiltonian, py::arg("ops"), py::arg("lambda1"),
          py::arg("lambda2") = 0.0);

    m.def("coherent_ket", &coherent_ket);
    m.def("cat_ket", &cat_ket);
    m.def("squeezed_vacuum_ket", &squeezed_vacuum_ket, py::arg("ops"), py::arg("xi"),
          py::arg("displacement") = Complex(0, 0));
    m.def("fock_superposition_ket", &fock_superposition_ket);
    m.def("density_from_ket", &density_from_ket);
    m.def("fidelity", &fidelity);
    m.def("fidelity_ket", &fidelity_ket);

    py::class_<Moments>(m, "Moments")
        .def_readonly("x_mean", &Moments::x_mean)
        .def_readonly("p_mean", &Moments::p_mean)
        .def_readonly("var_x", &Moments::var_x)
        .def_readonly("cov_xp", &Moments::cov_xp)
        .def_readonly("var_p", &Moments::var_p);
    m.def("moments", &moments);

    py::class_<StepParams>(m, "StepParams")
        .def(py::init<>())
        .def_readwrite("dt", &StepParams::dt)
        .def_readwrite("tau", &StepParams::tau)
        .def_readwrite("theta", &StepParams::theta)
        .def_readwrite("lambda1", &StepParams::lambda1)
        .def_readwrite("lambda2", &StepParams::lambda2);
    m.def("stratonovich_step", &stratonovich_step);
    m.def("ito_step", &ito_step);

    py::class_<NoiseStream>(m, "NoiseStream")
        .def(py::init([](std::uint64_t seed, std::uint64_t stream) {
                 return NoiseStream{seed, stream};
             }),
             py::arg("seed"), py::arg("stream_id") = 0)
        .def("normal", &NoiseStream::normal)
        .def("wiener", &NoiseStream::wiener);

    py::class_<ControlSchedule>(m, "ControlSchedule")
        .def(py::init<>())
        .def_readwrite("dt", &ControlSchedule::dt)
        .def_readwrite("theta", &ControlSchedule::theta)
        .def_readwrite("lambda1", &ControlSchedule::lambda1)
        .def_readwrite("r", &ControlSchedule::r);

    py::class_<TrajectoryRecord>(m, "TrajectoryRecord")
        .def_readonly("t", &TrajectoryRecord::t)
        .def_readonly("readout", &TrajectoryRecord::readout)
        .def_readonly("final_state", &TrajectoryRecord::final_state)
        .def("to_csv", &TrajectoryRecord::to_csv);
    m.def("simulate_trajectory", &simulate_trajectory, py::arg("rho0"), py::arg("schedule"),
          py::arg("tau"), py::arg("t_f"), py::arg("dt"), py::arg("noise"), py::arg("ops"),
          py::arg("record_steps") = true);

    py::class_<ScalarBundle>(m, "ScalarBundle")
        .def(py::init<>())
        .def_readwrite("g10", &ScalarBundle::g10)
        .def_readwrite("g01", &ScalarBundle::g01)
        .def_readwrite("k10", &ScalarBundle::k10)
        .def_readwrite("k01", &ScalarBundle::k01)
        .def_readwrite("g20", &ScalarBundle::g20)
        .def_readwrite("g11t", &ScalarBundle::g11t)
        .def_readwrite("g02", &ScalarBundle::g02)
        .def_readwrite("k20", &ScalarBundle::k20)
        .def_readwrite("k11", &ScalarBundle::k11)
        .def_readwrite("k02", &ScalarBundle::k02);

    m.def("bundle_from_state", &bundle_from_state);
    m.def("bundle_sigma_identity", &bundle_sigma_identity);
    m.def("optimal_readout", &optimal_readout);
    m.def("bundle_rhs", &bundle_rhs, py::arg("bundle"), py::arg("theta"), py::arg("lambda1"),
          py::arg("tau"), py::arg("lambda2") = 0.0);
    m.def("optimal_lambda1", &optimal_lambda1);
    m.def("optimal_theta",
          [](const ScalarBundle& b, double prev) { return optimal_theta(b, prev).theta; },
          py::arg("bundle"), py::arg("prev_theta") = 0.0);
    m.def("pontryagin_value",
          [](const ScalarBundle& b, double l1max, double tau) {
              return pontryagin_value(b, l1max, tau).K;
          });
    m.def("mccoy_coefficient", &mccoy_coefficient);
    m.def("cost_functional", &cost_functional);

    py::class_<MLPPath>(m, "MLPPath")
        .def_readonly("t", &MLPPath::t)
        .def_readonly("r", &MLPPath::r)
        .def_readonly("pontryagin", &MLPPath::pontryagin)
        .def_readonly("J", &MLPPath::J)
        .def_readonly("final_state", &MLPPath::final_state);
    py::class_<MLPResult>(m, "MLPResult")
        .def_readonly("path", &MLPResult::path)
        .def_readonly("schedule", &MLPResult::schedule);
    m.def("mlp_integrate",
          [](const Mat& rho0, const ScalarBundle& b0, double tau, double t_f, double dt,
             double l1max, const OperatorSet& ops) {
              return mlp_integrate(rho0, b0, tau, t_f, dt, l1max, ops);
          });
    m.def("schedule_from_bundle", &schedule_from_bundle);

    py::class_<SteadyCovariances>(m, "SteadyCovariances")
        .def_readonly("q3", &SteadyCovariances::q3)
        .def_readonly("q4", &SteadyCovariances::q4)
        .def_readonly("q5", &SteadyCovariances::q5);
    m.def("steady_state_covariances", &steady_state_covariances);
    m.def("squeezing_parameter", &squeezing_parameter);
    py::class_<GaussOptimalPath>(m, "GaussOptimalPath")
        .def(py::init<double, double, double, double, double, double>(), py::arg("q1i"),
             py::arg("q2i"), py::arg("q1f"), py::arg("q2f"), py::arg("t_f"), py::arg("tau"))
        .def("at", &GaussOptimalPath::at)
        .def_property_readonly("alpha1",
                               [](const GaussOptimalPath& p) { return p.constants().alpha1; })
        .def_property_readonly("alpha2",
                               [](const GaussOptimalPath& p) { return p.constants().alpha2; });

    py::class_<ShootingProblem>(m, "ShootingProblem")
        .def(py::init<>())
        .def_readwrite("rho0", &ShootingProblem::rho0)
        .def_readwrite("rho_target", &ShootingProblem::rho_target)
        .def_readwrite("tau", &ShootingProblem::tau)
        .def_readwrite("t_f", &ShootingProblem::t_f)
        .def_readwrite("dt", &ShootingProblem::dt)
        .def_readwrite("lambda1_max", &ShootingProblem::lambda1_max)
        .def_readwrite("fidelity_gate", &ShootingProblem::fidelity_gate);

    py::class_<AnnealConfig>(m, "AnnealConfig")
        .def(py::init<>())
        .def_readwrite("initial_temperature", &AnnealConfig::initial_temperature)
        .def_readwrite("cooling_rate", &AnnealConfig::cooling_rate)
        .def_readwrite("steps_per_temperature", &AnnealConfig::steps_per_temperature)
        .def_readwrite("proposal_scale", &AnnealConfig::proposal_scale)
        .def_readwrite("restarts", &AnnealConfig::restarts)
        .def_readwrite("seed", &AnnealConfig::seed)
        .def_readwrite("temperature_floor", &AnnealConfig::temperature_floor)
        .def_readwrite("max_evals_per_restart", &AnnealConfig::max_evals_per_restart)
        .def_readwrite("stall_levels", &AnnealConfig::stall_levels)
        .def_readwrite("restart_jitter", &AnnealConfig::restart_jitter);

    py::class_<OptimalControlSolution>(m, "OptimalControlSolution")
        .def_readonly("bundle0", &OptimalControlSolution::bundle0)
        .def_readonly("schedule", &OptimalControlSolution::schedule)
        .def_readonly("fidelity", &OptimalControlSolution::fidelity)
        .def_readonly("j_cost", &OptimalControlSolution::j_cost)
        .def_readonly("converged", &OptimalControlSolution::converged)
        .def("to_json", &OptimalControlSolution::to_json)
        .def_static("from_json", &OptimalControlSolution::from_json);
    m.def("anneal_optimal", &anneal_optimal, py::arg("problem"), py::arg("config"),
          py::arg("n_threads") = 1, py::call_guard<py::gil_scoped_release>());

    py::class_<FourierControl>(m, "FourierControl")
        .def_static("zeros", &FourierControl::zeros)
        .def("eval", &FourierControl::eval)
        .def_readonly("lambda1_max", &FourierControl::lambda1_max)
        .def("flatten", &FourierControl::flatten);
    py::class_<SampleControlSolution>(m, "SampleControlSolution")
        .def_readonly("control", &SampleControlSolution::control)
        .def_readonly("schedule", &SampleControlSolution::schedule)
        .def_readonly("fidelity", &SampleControlSolution::fidelity)
        .def_readonly("converged", &SampleControlSolution::converged)
        .def("to_json", &SampleControlSolution::to_json)
        .def_static("from_json", &SampleControlSolution::from_json);
    m.def("anneal_sample_control", &anneal_sample_control, py::arg("problem"), py::arg("config"),
          py::arg("n_threads") = 1, py::call_guard<py::gil_scoped_release>());

    py::class_<BatchSpec>(m, "BatchSpec")
        .def(py::init<>())
        .def_readwrite("control", &BatchSpec::control)
        .def_readwrite("rho0", &BatchSpec::rho0)
        .def_readwrite("rho_target", &BatchSpec::rho_target)
        .def_readwrite("n_traj", &BatchSpec::n_traj)
        .def_readwrite("base_seed", &BatchSpec::base_seed)
        .def_readwrite("tau", &BatchSpec::tau)
        .def_readwrite("t_f", &BatchSpec::t_f)
        .def_readwrite("dt", &BatchSpec::dt)
        .def_readwrite("thresholds", &BatchSpec::thresholds);
    py::class_<FidelityHistogram>(m, "FidelityHistogram")
        .def_readonly("bin_edges", &FidelityHistogram::bin_edges)
        .def_readonly("counts", &FidelityHistogram::counts)
        .def_readonly("fractions_above", &FidelityHistogram::fractions_above)
        .def_readonly("n", &FidelityHistogram::n)
        .def_readonly("failures", &FidelityHistogram::failures);
    py::class_<BatchResult>(m, "BatchResult")
        .def_readonly("hist", &BatchResult::hist)
        .def_readonly("fidelities", &BatchResult::fidelities);
    m.def("run_batch", &run_batch, py::arg("spec"), py::arg("ops"), py::arg("n_threads") = 1,
          py::call_guard<py::gil_scoped_release>());

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_static("preset", &ExperimentConfig::preset)
        .def_static("from_json_text", &ExperimentConfig::from_json_text)
        .def("to_json_text", &ExperimentConfig::to_json_text)
        .def_readwrite("name", &ExperimentConfig::name)
        .def_readwrite("dim", &ExperimentConfig::dim)
        .def_readwrite("tau", &ExperimentConfig::tau)
        .def_readwrite("t_f", &ExperimentConfig::t_f)
        .def_readwrite("dt", &ExperimentConfig::dt)
        .def_readwrite("lambda1_max", &ExperimentConfig::lambda1_max)
        .def_readwrite("seed", &ExperimentConfig::seed);
}
