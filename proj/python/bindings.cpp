#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "huda/bench.hpp"
#include "huda/compose.hpp"
#include "huda/grad.hpp"
#include "huda/pgm.hpp"
#include "huda/structure.hpp"
#include "huda/train.hpp"

namespace py = pybind11;
using namespace huda;

namespace {

using PyModel = std::shared_ptr<HudaModel>;

PyModel unconst(ModelPtr m) { return std::const_pointer_cast<HudaModel>(std::move(m)); }

EventQ q_from_list(const std::vector<int>& flags, std::size_t n_z) {
    if (flags.size() != n_z) throw DimensionMismatch("q length must equal n_z");
    EventQ q(n_z);
    for (std::size_t i = 0; i < n_z; ++i)
        if (flags[i]) q.set(i);
    return q;
}

SolverOpts make_opts(double rel_tol, double abs_tol, const std::vector<double>& dense) {
    SolverOpts opts;
    opts.rel_tol = rel_tol;
    opts.abs_tol = abs_tol;
    opts.dense_sampling = dense;
    return opts;
}

Occupancy occupancy_for(const std::string& topology) {
    return topology == "generic" ? generic_occupancy() : mask_for_topology(parse_topology(topology));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "composition, simulation and training of hybrid dynamic system models";
    m.attr("__version__") = "0.1.0";

    py::register_exception<HudaError>(m, "HudaError");

    py::class_<Dims>(m, "Dims")
        .def_readonly("n_xc", &Dims::n_xc)
        .def_readonly("n_xd", &Dims::n_xd)
        .def_readonly("n_u", &Dims::n_u)
        .def_readonly("n_y", &Dims::n_y)
        .def_readonly("n_z", &Dims::n_z)
        .def_readonly("n_p", &Dims::n_p)
        .def("__repr__", [](const Dims& d) {
            return "Dims(n_xc=" + std::to_string(d.n_xc) + ", n_xd=" + std::to_string(d.n_xd) +
                   ", n_u=" + std::to_string(d.n_u) + ", n_y=" + std::to_string(d.n_y) +
                   ", n_z=" + std::to_string(d.n_z) + ", n_p=" + std::to_string(d.n_p) + ")";
        });

    py::class_<HudaModel, PyModel>(m, "Model")
        .def_property_readonly("dims", &HudaModel::dims, py::return_value_policy::copy)
        .def_property_readonly("name", &HudaModel::name)
        .def("p0", &HudaModel::p0)
        .def("xc0", &HudaModel::xc0)
        .def("xd0", &HudaModel::xd0)
        .def(
            "fc",
            [](const HudaModel& self, std::vector<double> xc, std::vector<double> xd, std::vector<double> u,
               std::vector<double> p, double t) { return eval_fc(self, xc, xd, u, p, t); },
            py::arg("xc"), py::arg("xd") = std::vector<double>{}, py::arg("u") = std::vector<double>{},
            py::arg("p") = std::vector<double>{}, py::arg("t") = 0.0)
        .def(
            "g",
            [](const HudaModel& self, std::vector<double> xc, std::vector<double> xd, std::vector<double> u,
               std::vector<double> p, double t) { return eval_g(self, xc, xd, u, p, t); },
            py::arg("xc"), py::arg("xd") = std::vector<double>{}, py::arg("u") = std::vector<double>{},
            py::arg("p") = std::vector<double>{}, py::arg("t") = 0.0)
        .def(
            "c",
            [](const HudaModel& self, std::vector<double> xc, std::vector<double> xd, std::vector<double> u,
               std::vector<double> p, double t) { return eval_c(self, xc, xd, u, p, t); },
            py::arg("xc"), py::arg("xd") = std::vector<double>{}, py::arg("u") = std::vector<double>{},
            py::arg("p") = std::vector<double>{}, py::arg("t") = 0.0)
        .def(
            "affect",
            [](const HudaModel& self, std::vector<double> xc, std::vector<double> xd, std::vector<int> q,
               std::vector<double> u, std::vector<double> p, double t) {
                return eval_a(self, xc, xd, u, p, t, q_from_list(q, self.dims().n_z));
            },
            py::arg("xc"), py::arg("xd"), py::arg("q"), py::arg("u") = std::vector<double>{},
            py::arg("p") = std::vector<double>{}, py::arg("t") = 0.0);

    m.def("build_fpm", [] { return unconst(build_fpm()); }, "bouncing-ball first-principles model");
    m.def("build_ground_truth", [] { return unconst(build_ground_truth()); },
          "bouncing ball with quadratic air friction");
    m.def(
        "build_variant",
        [](const std::string& kind, std::uint64_t seed) { return unconst(build_variant(parse_variant(kind), seed)); },
        py::arg("kind"), py::arg("seed") = 1,
        "one of: continuous, discrete, continuous+event, discrete+event");
    m.def(
        "variant_initial_state",
        [](const std::string& kind, std::vector<double> ball_x0) {
            return variant_initial_state(parse_variant(kind), ball_x0);
        },
        py::arg("kind"), py::arg("ball_x0"));

    py::class_<Scenario>(m, "Scenario")
        .def_readonly("id", &Scenario::id)
        .def_readonly("x0", &Scenario::x0)
        .def_readonly("training", &Scenario::training)
        .def_readonly("tspan", &Scenario::tspan);
    m.def("scenario", &scenario, py::arg("s"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("scenario_id", &Dataset::scenario_id)
        .def_readonly("tspan", &Dataset::tspan)
        .def_readonly("x0", &Dataset::x0)
        .def_readonly("times", &Dataset::times)
        .def_readonly("states", &Dataset::states)
        .def("write_csv", [](const Dataset& d, const std::string& path) { write_dataset_csv(d, path); });
    m.def(
        "generate_dataset", [](int s, double hz) { return generate_dataset(scenario(s), hz); }, py::arg("s"),
        py::arg("sample_hz") = 50.0);
    m.def(
        "generate_dataset_from",
        [](const PyModel& truth, std::vector<double> x0, double t0, double tf, double hz,
           std::vector<double> times) {
            if (!times.empty()) return generate_dataset(*truth, x0, {t0, tf}, std::move(times), 0);
            return generate_dataset(*truth, x0, {t0, tf}, hz);
        },
        py::arg("truth"), py::arg("x0"), py::arg("t0"), py::arg("tf"), py::arg("sample_hz") = 50.0,
        py::arg("times") = std::vector<double>{});
    m.def(
        "rnn_sample_times", [](double t0, double tf) { return rnn_sample_times({t0, tf}); }, py::arg("t0"),
        py::arg("tf"), "midpoint sample grid for the hold-type variants");
    m.def("read_dataset_csv", &read_dataset_csv, py::arg("path"));

    py::class_<ConnectionSet>(m, "ConnectionSet")
        .def_property_readonly("topology", [](const ConnectionSet& c) { return topology_name(c.topology); })
        .def_readonly("seed", &ConnectionSet::seed)
        .def("to_json", &connection_to_json)
        .def_static("from_json", &connection_from_json)
        .def("block",
             [](const ConnectionSet& c, const std::string& name) {
                 for (int r = 0; r < 3; ++r) {
                     for (int col = 0; col < 3; ++col)
                         if (name == block_name(static_cast<ConnRow>(r), static_cast<ConnCol>(col))) {
                             const ConnBlock& b = c.blocks[r][col];
                             const char* mask = b.mask == BlockMask::Zero
                                                    ? "zero"
                                                    : (b.mask == BlockMask::Frozen ? "frozen" : "trainable");
                             return py::make_tuple(b.rows, b.cols, mask, b.w);
                         }
                 }
                 throw HudaError("unknown block '" + name + "'");
             })
        .def("dump_grayscale", [](const ConnectionSet& c, const std::string& name, const std::string& path) {
            for (int r = 0; r < 3; ++r)
                for (int col = 0; col < 3; ++col)
                    if (name == block_name(static_cast<ConnRow>(r), static_cast<ConnCol>(col)))
                        return dump_matrix_grayscale(name, c.blocks[r][col], path);
            throw HudaError("unknown block '" + name + "'");
        });
    m.def(
        "init_connections",
        [](const std::string& topology, double noise_scale, std::uint64_t seed, std::size_t u_a,
           std::size_t u_b, std::size_t g_z, std::size_t g_a, std::size_t g_b, std::size_t u_z) {
            return init_connections(parse_topology(topology), ConnDims{u_a, u_b, g_z, g_a, g_b, u_z},
                                    noise_scale, seed);
        },
        py::arg("topology"), py::arg("noise_scale") = 0.05, py::arg("seed") = 1, py::arg("u_a") = 4,
        py::arg("u_b") = 4, py::arg("g_z") = 4, py::arg("g_a") = 4, py::arg("g_b") = 2, py::arg("u_z") = 4);

    m.def(
        "combine",
        [](const PyModel& a, const PyModel& b, const ConnectionSet& conn) {
            return unconst(std::static_pointer_cast<const HudaModel>(combine(a, b, conn)));
        },
        py::arg("model_a"), py::arg("model_b"), py::arg("conn"),
        "combine two models through the connection equations (loop-free wirings only)");

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("times",
                               [](const Trajectory& t) {
                                   std::vector<double> out;
                                   for (const auto& s : t.samples) out.push_back(s.when.t);
                                   return out;
                               })
        .def_property_readonly("minors",
                               [](const Trajectory& t) {
                                   std::vector<std::uint32_t> out;
                                   for (const auto& s : t.samples) out.push_back(s.when.minor);
                                   return out;
                               })
        .def_property_readonly("states",
                               [](const Trajectory& t) {
                                   std::vector<std::vector<double>> out;
                                   for (const auto& s : t.samples) {
                                       std::vector<double> x(s.xc);
                                       x.insert(x.end(), s.xd.begin(), s.xd.end());
                                       out.push_back(std::move(x));
                                   }
                                   return out;
                               })
        .def_property_readonly("events",
                               [](const Trajectory& t) {
                                   py::list out;
                                   for (const auto& e : t.events) {
                                       py::dict d;
                                       d["t"] = e.when.t;
                                       d["minor"] = e.when.minor;
                                       d["group"] = e.group;
                                       std::vector<int> q(e.q.q.begin(), e.q.q.end());
                                       d["q"] = q;
                                       d["x_pre"] = e.x_pre;
                                       d["x_post"] = e.x_post;
                                       out.append(d);
                                   }
                                   return out;
                               })
        .def("eval", &Trajectory::eval, py::arg("t"))
        .def("write_csv", [](const Trajectory& t, const std::string& path) { write_trajectory_csv(t, path); })
        .def("write_events_csv", [](const Trajectory& t, const std::string& path, std::size_t groups) {
            write_events_csv(t, path, groups);
        }, py::arg("path"), py::arg("n_groups") = 1);

    m.def(
        "integrate",
        [](const PyModel& model, std::vector<double> xc0, std::vector<double> xd0, std::vector<double> p,
           double t0, double tf, double rel_tol, double abs_tol, std::vector<double> dense) {
            if (p.empty()) p = model->p0();
            return integrate(*model, xc0, xd0, p, {t0, tf}, make_opts(rel_tol, abs_tol, dense));
        },
        py::arg("model"), py::arg("xc0"), py::arg("xd0") = std::vector<double>{},
        py::arg("p") = std::vector<double>{}, py::arg("t0") = 0.0, py::arg("tf") = 2.1,
        py::arg("rel_tol") = 1e-6, py::arg("abs_tol") = 1e-8, py::arg("dense") = std::vector<double>{});

    m.def(
        "mae_loss",
        [](const Trajectory& traj, const Dataset& data, double horizon) {
            return mae_loss(traj, data, LossSpec{}, horizon);
        },
        py::arg("trajectory"), py::arg("dataset"), py::arg("horizon"));
    m.def(
        "evaluate_mae",
        [](const PyModel& model, const Dataset& data, std::vector<double> params, double horizon,
           double rel_tol, double abs_tol) {
            if (params.empty()) params = model->p0();
            return evaluate_mae(*model, data, params, horizon, LossSpec{}, make_opts(rel_tol, abs_tol, {}));
        },
        py::arg("model"), py::arg("dataset"), py::arg("params") = std::vector<double>{},
        py::arg("horizon") = 2.1, py::arg("rel_tol") = 1e-6, py::arg("abs_tol") = 1e-8);

    m.def(
        "train",
        [](const PyModel& model, const std::vector<Dataset>& datasets, std::uint64_t steps,
           std::uint64_t seed, double rel_tol, double abs_tol,
           std::vector<std::pair<std::vector<double>, std::vector<double>>> initial_states) {
            TrainConfig cfg;
            cfg.steps = steps;
            cfg.seed = seed;
            cfg.solver = make_opts(rel_tol, abs_tol, {});
            cfg.initial_states = std::move(initial_states);
            const TrainResult res = train(*model, datasets, cfg);
            py::dict out;
            out["params"] = res.state.params;
            out["horizon"] = res.state.horizon;
            out["steps"] = res.state.step_count;
            py::list hist;
            for (const auto& e : res.history)
                hist.append(py::make_tuple(e.step, e.scenario, e.horizon, e.loss));
            out["history"] = hist;
            return out;
        },
        py::arg("model"), py::arg("datasets"), py::arg("steps") = 100, py::arg("seed") = 1,
        py::arg("rel_tol") = 1e-6, py::arg("abs_tol") = 1e-8,
        py::arg("initial_states") = std::vector<std::pair<std::vector<double>, std::vector<double>>>{});

    m.def("loop_free", [](const std::string& topology) { return loop_free(occupancy_for(topology)); },
          py::arg("topology"));
    m.def(
        "analyze",
        [](const std::string& topology) {
            const ConnDims dims{4, 4, 4, 4, 2, 4};
            const IncidenceMatrix inc =
                assemble_incidence(BoolMat(dims.g_a, dims.u_a, true), BoolMat(dims.g_b, dims.u_b, true),
                                   occupancy_for(topology), dims);
            py::dict out;
            out["ascii"] = render_ascii(inc);
            py::list comps;
            for (const auto& comp : tarjan_scc(inc)) {
                py::list c;
                for (int e : comp) c.append(std::string(eq_label(e)));
                comps.append(c);
            }
            out["components"] = comps;
            const BltResult res = blt_sort(inc);
            if (res.ok()) {
                py::list order;
                for (const auto& [eq, var] : res.order->steps) order.append(std::string(eq_label(eq)));
                out["order"] = order;
            } else {
                out["loops"] = res.loops.describe();
            }
            return out;
        },
        py::arg("topology"), "structural report for a topology string or 'generic'");

    m.def(
        "ffnn_init",
        [](const std::vector<std::tuple<std::size_t, std::size_t, std::string>>& layers, std::uint64_t seed) {
            FfnnSpec spec;
            for (const auto& [in, out, act] : layers)
                spec.layers.push_back(LayerSpec{in, out, act == "linear" ? Activation::Linear : Activation::Tanh});
            return init_ffnn(spec, seed);
        },
        py::arg("layers"), py::arg("seed") = 1);
    m.def(
        "ffnn_model",
        [](std::uint64_t seed) {
            return unconst(std::static_pointer_cast<const HudaModel>(
                std::make_shared<FfnnModel>(mlm_ffnn_spec(), seed)));
        },
        py::arg("seed") = 1, "the benchmark two-layer tanh network as an algebraic model");
}
