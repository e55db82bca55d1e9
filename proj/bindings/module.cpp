#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rholab/cli.hpp"
#include "rholab/config.hpp"
#include "rholab/errors.hpp"
#include "rholab/expansion.hpp"
#include "rholab/filtering.hpp"
#include "rholab/gradient.hpp"
#include "rholab/grid_operator.hpp"
#include "rholab/iterated_integrals.hpp"
#include "rholab/multi_index.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/robust.hpp"
#include "rholab/sde_model.hpp"
#include "rholab/semigroup.hpp"
#include "rholab/special_functions.hpp"

namespace py = pybind11;
using namespace rholab;

namespace {

Vec start_point(const SdeModel& model, double x0) { return Vec::Constant(model.N, x0); }

std::function<double(const Vec&)> wrap_observable(const py::function& f) {
    return [f](const Vec& x) { return f(x).cast<double>(); };
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "numerical laboratory for the unnormalised nonlinear-filtering semigroup";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalGuardError>(m, "NumericalGuardError", PyExc_RuntimeError);

    // ---- models -----------------------------------------------------------
    py::class_<SdeModel>(m, "Model", "signal/observation model (fields + sensors)")
        .def_readonly("name", &SdeModel::name)
        .def_readonly("state_dim", &SdeModel::N)
        .def_readonly("noise_dim", &SdeModel::d1)
        .def_readonly("obs_dim", &SdeModel::d2)
        .def_readonly("ufg_ell", &SdeModel::ufg_ell)
        .def(
            "sensor",
            [](const SdeModel& model, int channel, const Vec& x) {
                if (channel < 0 || channel >= model.d2)
                    throw ValidationError("sensor channel out of range");
                return model.h[static_cast<std::size_t>(channel)](x);
            },
            py::arg("channel"), py::arg("x"), "evaluate sensor h_channel at a state")
        .def("__repr__", [](const SdeModel& model) {
            std::ostringstream ss;
            ss << "Model(name='" << model.name << "', state_dim=" << model.N
               << ", obs_dim=" << model.d2 << ")";
            return ss.str();
        });

    m.def("preset", &preset_by_name, py::arg("name"),
          "bundled model by name: linear-gaussian, cubic-sensor, bm-1d, ou-tanh");
    m.def(
        "model_from_json",
        [](const std::string& text) {
            Json spec;
            try {
                spec = Json::parse(text);
            } catch (const Json::parse_error& e) {
                throw ValidationError(std::string("model JSON: ") + e.what());
            }
            return model_from_json(spec);
        },
        py::arg("text"),
        "model from a JSON string: {\"preset\": name} or a 1-D polynomial "
        "{\"custom\": {...}} description");

    // ---- paths ------------------------------------------------------------
    py::class_<PathGrid>(m, "PathGrid", "uniform time grid with noise and observation paths")
        .def_property_readonly("horizon", [](const PathGrid& g) { return g.T; })
        .def_property_readonly("steps", [](const PathGrid& g) { return g.M; })
        .def_property_readonly("dt", &PathGrid::dt)
        .def_property_readonly("channels", &PathGrid::d2)
        .def_property_readonly("observation", [](const PathGrid& g) { return g.Y; },
                               "(steps+1) x channels matrix of Y values")
        .def_property_readonly("signal_increments", [](const PathGrid& g) { return g.dB; })
        .def("time", &PathGrid::time, py::arg("k"));

    m.def(
        "sample_observation_path",
        [](const SdeModel& model, double x0, double horizon, int steps, std::uint64_t seed,
           std::uint64_t scenario) {
            return sample_observation_path(model, start_point(model, x0), horizon, steps, seed,
                                           scenario);
        },
        py::arg("model"), py::arg("x0"), py::arg("horizon"), py::arg("steps"), py::arg("seed"),
        py::arg("scenario") = 0,
        "hidden signal from x0 plus observation noise, packaged as one scenario");
    m.def(
        "brownian_observation_path",
        [](double horizon, int steps, int channels, std::uint64_t seed, std::uint64_t stream) {
            PathGrid g = make_grid(horizon, steps, 1, channels);
            fill_brownian_observation(g, seed, stream);
            return g;
        },
        py::arg("horizon"), py::arg("steps"), py::arg("channels") = 1, py::arg("seed") = 1,
        py::arg("stream") = 0, "reference-measure scenario: Y is a plain Brownian path");
    m.def(
        "simulate_signal",
        [](const SdeModel& model, double x0, const PathGrid& grid) {
            return simulate_signal(model, start_point(model, x0), grid);
        },
        py::arg("model"), py::arg("x0"), py::arg("grid"),
        "Euler path of the hidden signal along the grid's noise increments");

    // ---- filtering --------------------------------------------------------
    py::class_<RhoResult>(m, "RhoResult")
        .def_readonly("value", &RhoResult::value)
        .def_readonly("value_stderr", &RhoResult::stderr_)
        .def_readonly("mass", &RhoResult::mass)
        .def_readonly("mass_stderr", &RhoResult::mass_stderr)
        .def_readonly("normalised", &RhoResult::normalised)
        .def_readonly("normalised_stderr", &RhoResult::normalised_stderr)
        .def_readonly("paths", &RhoResult::n_paths);

    m.def(
        "rho_mc",
        [](const SdeModel& model, double x0, const PathGrid& grid, const py::function& phi,
           int n_paths, std::uint64_t seed, std::uint64_t stream_base) {
            return rho_mc(model, start_point(model, x0), grid, wrap_observable(phi), n_paths,
                          seed, stream_base);
        },
        py::arg("model"), py::arg("x0"), py::arg("grid"), py::arg("phi"), py::arg("n_paths"),
        py::arg("seed"), py::arg("stream_base") = 0,
        "Monte Carlo estimate of rho_t(phi), its mass rho_t(1) and their ratio");

    m.def(
        "kalman_bucy_oracle",
        [](double a, double sigma, const PathGrid& grid, double m0, double p0) {
            const KalmanBucyResult r = kalman_bucy_oracle(a, sigma, grid, m0, p0);
            return py::make_tuple(r.mean, r.variance);
        },
        py::arg("a"), py::arg("sigma"), py::arg("grid"), py::arg("m0"), py::arg("p0"),
        "(mean, variance) of the exact linear-Gaussian filter along the grid");

    py::class_<ParticleFilterResult>(m, "ParticleFilterResult")
        .def_readonly("normalised", &ParticleFilterResult::normalised)
        .def_readonly("stderr", &ParticleFilterResult::stderr_)
        .def_readonly("log_mass", &ParticleFilterResult::log_mass)
        .def_readonly("replicate_values", &ParticleFilterResult::replicate_values);

    m.def(
        "particle_filter",
        [](const SdeModel& model, double x0, const PathGrid& grid, const py::function& phi,
           int n_particles, int n_replicates, std::uint64_t seed, std::uint64_t stream_base) {
            return particle_filter(model, start_point(model, x0), grid, wrap_observable(phi),
                                   n_particles, n_replicates, seed, stream_base);
        },
        py::arg("model"), py::arg("x0"), py::arg("grid"), py::arg("phi"),
        py::arg("particles"), py::arg("replicates") = 5, py::arg("seed") = 1,
        py::arg("stream_base") = 0,
        "bootstrap particle estimate of pi_t(phi) with replicate error bars");

    py::class_<MassBoundReport>(m, "MassBoundReport")
        .def_readonly("inv_mass", &MassBoundReport::inv_mass)
        .def_readonly("bound", &MassBoundReport::bound)
        .def_readonly("constant", &MassBoundReport::constant)
        .def_readonly("y_functional", &MassBoundReport::y_functional)
        .def_readonly("mass", &MassBoundReport::mass)
        .def_readonly("mass_stderr", &MassBoundReport::mass_stderr)
        .def_readonly("passed", &MassBoundReport::pass);

    m.def(
        "mass_lower_bound_check",
        [](const SdeModel& model, double x0, const PathGrid& grid, const SpatialGrid& sgrid,
           int n_paths, std::uint64_t seed, std::uint64_t stream_base) {
            return mass_lower_bound_check(model, start_point(model, x0), grid, sgrid, n_paths,
                                          seed, stream_base);
        },
        py::arg("model"), py::arg("x0"), py::arg("grid"), py::arg("sgrid"),
        py::arg("n_paths"), py::arg("seed"), py::arg("stream_base") = 0,
        "checks 1/rho_t(1) against the exponential observation functional bound");

    // ---- spatial grid and semigroup ----------------------------------------
    py::class_<SpatialGrid>(m, "SpatialGrid", "[-L, L]^N tensor grid with reflecting edges")
        .def(py::init<int, int, double>(), py::arg("dims"), py::arg("nodes"),
             py::arg("half_width"))
        .def_readonly("dims", &SpatialGrid::N)
        .def_readonly("nodes", &SpatialGrid::n)
        .def_readonly("half_width", &SpatialGrid::L)
        .def_property_readonly("cell", &SpatialGrid::h)
        .def_property_readonly("size", &SpatialGrid::size)
        .def("node", &SpatialGrid::node, py::arg("index"), "coordinates of a flat node index")
        .def(
            "discretize",
            [](const SpatialGrid& g, const py::function& f) {
                return g.discretize([f](const Vec& x) { return f(x).cast<double>(); });
            },
            py::arg("f"), "grid function from a python callable of the state vector");

    py::class_<GridSemigroup>(m, "GridSemigroup",
                              "grid realisation of the signal semigroup e^{tA}")
        .def(py::init([](const SdeModel& model, const SpatialGrid& grid) {
                 return std::make_unique<GridSemigroup>(model, grid);
             }),
             py::arg("model"), py::arg("grid"))
        .def(
            "apply", [](const GridSemigroup& sg, double t, const Vec& phi) {
                return sg.apply(t, phi);
            },
            py::arg("t"), py::arg("phi"));

    m.def(
        "h1_norm",
        [](const SdeModel& model, int ell, const Vec& phi, const SpatialGrid& grid,
           int margin_cells) { return h1_norm(model.V, ell, phi, grid, margin_cells); },
        py::arg("model"), py::arg("ell"), py::arg("phi"), py::arg("grid"),
        py::arg("margin_cells") = 10,
        "bracket-Sobolev norm of a grid function up to bracket degree ell");

    m.def("discretize_sensors", &discretize_sensors, py::arg("model"), py::arg("grid"),
          "grid functions of the model's sensors, one per channel");

    // ---- observation expansion ---------------------------------------------
    py::class_<ExpansionResult>(m, "ExpansionResult")
        .def_readonly("levels", &ExpansionResult::levels)
        .def_readonly("partial_sums", &ExpansionResult::partial_sums)
        .def_readonly("level_sup", &ExpansionResult::level_sup)
        .def_property_readonly("truncation",
                               [](const ExpansionResult& r) { return r.truncation(); });

    m.def("truncated_expansion", &truncated_expansion, py::arg("semigroup"),
          py::arg("sensors"), py::arg("path"), py::arg("phi"), py::arg("levels"),
          py::arg("s_idx"), py::arg("t_idx"),
          "levels 0..levels of the observation expansion of rho as grid functions");
    m.def("level_sums", &level_sums, py::arg("semigroup"), py::arg("sensors"), py::arg("path"),
          py::arg("phi"), py::arg("levels"), py::arg("s_idx"), py::arg("t_idx"));
    m.def("word_operator_value", &word_operator_value, py::arg("semigroup"),
          py::arg("sensors"), py::arg("path"), py::arg("phi"), py::arg("word"),
          py::arg("s_idx"), py::arg("t_idx"),
          "single-word operator contribution for a nonempty observation word");

    py::class_<DualityReport>(m, "DualityReport")
        .def_readonly("per_level", &DualityReport::per_level)
        .def_readonly("summed", &DualityReport::summed)
        .def_readonly("max_residual", &DualityReport::max_residual);

    m.def("duality_check", &duality_check, py::arg("semigroup"), py::arg("sensors"),
          py::arg("path"), py::arg("phi"), py::arg("psi"), py::arg("levels"), py::arg("s_idx"),
          py::arg("t_idx"), "pairs the forward expansion against its transpose recursion");

    // ---- iterated observation integrals -------------------------------------
    m.def("observation_words", &observation_words, py::arg("length"), py::arg("channels"),
          "all observation words of the given length over 1..channels");
    m.def("iterated_ito", &iterated_ito, py::arg("grid"), py::arg("word"), py::arg("s_idx"),
          py::arg("t_idx"), "left-point iterated integral of Y for one word");
    m.def("iterated_ito_at", &iterated_ito_at, py::arg("grid"), py::arg("word"), py::arg("s"),
          py::arg("t"), "same, addressed by grid times instead of indices");

    py::class_<ChenReport>(m, "ChenReport")
        .def_readonly("max_violation", &ChenReport::max_violation)
        .def_readonly("worst_word", &ChenReport::worst_word);

    m.def("chen_check", &chen_check, py::arg("grid"), py::arg("k"), py::arg("s_idx"),
          py::arg("u_idx"), py::arg("t_idx"),
          "max multiplicativity defect over words up to length k");
    m.def("shuffle_pair_residual", &shuffle_pair_residual, py::arg("grid"), py::arg("ch_i"),
          py::arg("ch_j"), py::arg("s_idx"), py::arg("t_idx"),
          "discrete shuffle identity residual with its covariation correction");

    // ---- pathwise representation and derivative exponents -------------------
    m.def(
        "ibp_term_labels",
        [](int level) {
            std::vector<std::string> labels;
            for (const IbpTerm& term : ibp_terms(level)) labels.push_back(ibp_term_label(term));
            return labels;
        },
        py::arg("level"), "operator-chain labels of the integration-by-parts terms");
    m.def("ibp_level_value", &ibp_level_value, py::arg("semigroup"), py::arg("h_grid"),
          py::arg("path"), py::arg("phi"), py::arg("level"), py::arg("s_idx"),
          py::arg("t_idx"),
          "level operator evaluated through the integration-by-parts form");

    py::enum_<GradientTarget>(m, "GradientTarget")
        .value("heat", GradientTarget::heat)
        .value("rho", GradientTarget::rho)
        .value("pi", GradientTarget::pi);

    py::class_<ExponentReport>(m, "ExponentReport")
        .def_readonly("target", &ExponentReport::target)
        .def_readonly("alpha", &ExponentReport::alpha)
        .def_readonly("beta", &ExponentReport::beta)
        .def_readonly("times", &ExponentReport::times)
        .def_readonly("sup_norms", &ExponentReport::sup_norms)
        .def_readonly("slope", &ExponentReport::slope)
        .def_readonly("theoretical", &ExponentReport::theoretical)
        .def_readonly("margin", &ExponentReport::margin)
        .def_readonly("passed", &ExponentReport::pass);

    m.def(
        "gradient_exponent_fit",
        [](const SdeModel& model, const GridSemigroup& sg, GradientTarget target,
           const MultiIndex& alpha, const MultiIndex& beta, const Vec& phi,
           const std::vector<double>& times, const PathGrid* path, int levels) {
            return gradient_exponent_fit(model, sg, target, alpha, beta, phi, times, path,
                                         levels);
        },
        py::arg("model"), py::arg("semigroup"), py::arg("target"), py::arg("alpha"),
        py::arg("beta"), py::arg("phi"), py::arg("times"), py::arg("path") = nullptr,
        py::arg("levels") = 3,
        "log-log slope of ||D_alpha T_t D_beta phi||_inf against the -(deg/2) target");

    // ---- special functions ---------------------------------------------------
    py::class_<NeoclassicalResult>(m, "NeoclassicalResult")
        .def_readonly("lhs", &NeoclassicalResult::lhs)
        .def_readonly("rhs", &NeoclassicalResult::rhs)
        .def_readonly("passed", &NeoclassicalResult::pass);

    m.def("neoclassical_check", &neoclassical_check, py::arg("q"), py::arg("n"), py::arg("s"),
          py::arg("t"), "fractional binomial inequality at one parameter point");
    m.def("remainder_bound", &remainder_bound, py::arg("h_sup"), py::arg("t"), py::arg("k"),
          py::arg("phi_sup"), "mean-square bound on the tail after truncation level k");
    m.def("theta_constant", &theta_constant, py::arg("q"));

    // ---- command line ----------------------------------------------------------
    m.def(
        "cli_run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "run one CLI invocation; returns (exit_code, stdout, stderr)");
}
