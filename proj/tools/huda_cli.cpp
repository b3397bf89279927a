#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "huda/bench.hpp"
#include "huda/compose.hpp"
#include "huda/pgm.hpp"
#include "huda/structure.hpp"
#include "huda/train.hpp"

namespace fs = std::filesystem;
using namespace huda;

namespace {

struct CommonOpts {
    std::string topology = "P";
    std::string scenarios_path;
    std::uint64_t seed = 1;
    std::uint64_t steps = 3000;
    bool full_paper_budget = false;
    std::string out_dir;
    double sample_hz = 50.0;
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;
    double noise_scale = 0.01;

    fs::path out() const {
        std::string dir = out_dir;
        if (dir.empty()) {
            if (const char* env = std::getenv("HUDA_OUT")) dir = env;
        }
        if (dir.empty()) dir = "huda_out";
        fs::create_directories(dir);
        return dir;
    }
    SolverOpts solver() const {
        SolverOpts opts;
        opts.rel_tol = rel_tol;
        opts.abs_tol = abs_tol;
        return opts;
    }
    std::uint64_t budget() const { return full_paper_budget ? 20000 : steps; }
};

void add_common(CLI::App* cmd, CommonOpts& opt, bool with_topology) {
    if (with_topology) cmd->add_option("--topology", opt.topology, "topology string, e.g. PSD, PSDb, P, SD");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--steps", opt.steps, "training steps");
    cmd->add_flag("--full-paper-budget", opt.full_paper_budget, "train for 20,000 steps");
    cmd->add_option("--out", opt.out_dir, "output directory (default $HUDA_OUT or ./huda_out)");
    cmd->add_option("--sample-hz", opt.sample_hz, "data sampling rate");
    cmd->add_option("--rel-tol", opt.rel_tol, "solver relative tolerance");
    cmd->add_option("--abs-tol", opt.abs_tol, "solver absolute tolerance");
    cmd->add_option("--noise-scale", opt.noise_scale, "connection initialization noise");
    cmd->add_option("--scenarios", opt.scenarios_path, "JSON file overriding the scenario definitions");
}

void dump_connection_blocks(const ConnectionSet& conn, const fs::path& dir) {
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            const ConnBlock& blk = conn.blocks[r][c];
            if (blk.mask == BlockMask::Zero) continue;
            const std::string name = block_name(static_cast<ConnRow>(r), static_cast<ConnCol>(c));
            dump_matrix_grayscale(name, blk, (dir / (name + ".pgm")).string());
        }
    }
}

std::string sanitize(std::string name) {
    for (char& ch : name)
        if (ch == '+') ch = '_';
    return name;
}

int cmd_experiment1(const CommonOpts& opt) {
    const TopologyTag tag = parse_topology(opt.topology);
    if (!tag.parallel && !tag.sequential)
        throw HudaError("topology '" + opt.topology +
                        "' is by design not capable of expressing the bouncing ball (it linearly connects the "
                        "state to the state derivative); pick one of P, PD, PS, PSD, S, SD");

    const fs::path out = opt.out();
    std::fprintf(stderr, "[experiment1] topology %s, seed %llu, %llu steps\n", topology_name(tag).c_str(),
                 static_cast<unsigned long long>(opt.seed), static_cast<unsigned long long>(opt.budget()));

    const std::vector<Scenario> scenarios =
        opt.scenarios_path.empty() ? default_scenarios() : load_scenarios_json(opt.scenarios_path);
    std::vector<Dataset> train_data;
    std::vector<Dataset> test_data;
    for (const Scenario& sc : scenarios) {
        Dataset d = generate_dataset(sc, opt.sample_hz);
        write_dataset_csv(d, (out / ("data_s" + std::to_string(sc.id) + ".csv")).string());
        (sc.training ? train_data : test_data).push_back(std::move(d));
    }
    if (train_data.empty()) throw HudaError("scenario set has no training scenarios");

    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), opt.seed + 1000);
    const auto conn = init_connections(tag, ConnDims{4, 4, 4, 4, 2, 4}, opt.noise_scale, opt.seed);
    const auto cm = combine(fpm, mlm, conn);

    TrainConfig cfg;
    cfg.steps = opt.budget();
    cfg.seed = opt.seed;
    cfg.solver = opt.solver();
    const TrainResult res = train(*cm, train_data, cfg);

    write_loss_history_csv(res.history, (out / "loss_history.csv").string());
    save_checkpoint(res.state, (out / "checkpoint.json").string());
    const ConnectionSet conn_final = cm->connection_with(res.state.params);
    save_connection_json(conn_final, (out / "connections.json").string());
    dump_connection_blocks(conn_final, out);

    double worst_train = 0.0;
    std::printf("topology %s after %llu steps (horizon %.3f s of %.3f s)\n", topology_name(tag).c_str(),
                static_cast<unsigned long long>(res.state.step_count), res.state.horizon,
                res.state.horizon_max);
    for (const Dataset& d : train_data) {
        const double mae = evaluate_mae(*cm, d, res.state.params, res.state.horizon_max, cfg.loss, cfg.solver);
        worst_train = std::max(worst_train, mae);
        std::printf("train MAE s%d: %.6f\n", d.scenario_id, mae);

        const auto traj = integrate(*cm, d.x0, {}, res.state.params, d.tspan, cfg.solver);
        const std::string base = "traj_train_s" + std::to_string(d.scenario_id);
        write_trajectory_csv(traj, (out / (base + ".csv")).string());
        write_events_csv(traj, (out / (base + "_events.csv")).string(), 2);
    }
    std::printf("worst train MAE: %.6f\n", worst_train);
    for (const Dataset& d : test_data) {
        const double test_mae =
            evaluate_mae(*cm, d, res.state.params, res.state.horizon_max, cfg.loss, cfg.solver);
        const auto test_traj = integrate(*cm, d.x0, {}, res.state.params, d.tspan, cfg.solver);
        const std::string base = "traj_test_s" + std::to_string(d.scenario_id);
        write_trajectory_csv(test_traj, (out / (base + ".csv")).string());
        write_events_csv(test_traj, (out / (base + "_events.csv")).string(), 2);
        std::printf("test MAE s%d: %.6f\n", d.scenario_id, test_mae);
    }
    std::printf("artifacts in %s\n", out.string().c_str());
    return 0;
}

int cmd_experiment2(const CommonOpts& opt) {
    const fs::path out = opt.out();
    // the easy trajectory: a single drop with one bounce
    const std::vector<double> x0{0.0, 0.0, 0.5, 0.0};
    const std::pair<double, double> tspan{0.0, 0.9};
    const auto truth = build_ground_truth();
    const Dataset data = generate_dataset(*truth, x0, tspan, opt.sample_hz);
    // hold-type variants compare at the midpoints of their 10 Hz intervals
    const Dataset data_hold = generate_dataset(*truth, x0, tspan, rnn_sample_times(tspan), 0);
    write_dataset_csv(data, (out / "data_easy.csv").string());
    write_dataset_csv(data_hold, (out / "data_easy_10hz.csv").string());

    std::fprintf(stderr, "[experiment2] four variants, seed %llu, %llu steps each\n",
                 static_cast<unsigned long long>(opt.seed), static_cast<unsigned long long>(opt.budget()));

    for (VariantKind kind : {VariantKind::Continuous, VariantKind::Discrete, VariantKind::ContinuousEvent,
                             VariantKind::DiscreteEvent}) {
        const bool hold = kind == VariantKind::Discrete || kind == VariantKind::DiscreteEvent;
        const Dataset& d = hold ? data_hold : data;
        const auto model = build_variant(kind, opt.seed);
        TrainConfig cfg;
        cfg.steps = opt.budget();
        cfg.seed = opt.seed;
        cfg.solver = opt.solver();
        cfg.initial_states = {variant_initial_state(kind, x0)};
        const TrainResult res = train(*model, {d}, cfg);

        const auto init = variant_initial_state(kind, x0);
        const double before = simulate_loss<double>(*model, d, model->p0(), init.first, init.second,
                                                    tspan.second, cfg.loss, cfg.solver);
        const double after = simulate_loss<double>(*model, d, res.state.params, init.first, init.second,
                                                   tspan.second, cfg.loss, cfg.solver);

        const std::string base = sanitize(variant_name(kind));
        write_loss_history_csv(res.history, (out / (base + "_loss_history.csv")).string());
        save_checkpoint(res.state, (out / (base + "_checkpoint.json")).string());
        std::vector<double> xc0 = init.first, xd0 = init.second;
        const auto traj = integrate(*model, xc0, xd0, res.state.params, tspan, cfg.solver);
        write_trajectory_csv(traj, (out / ("traj_" + base + ".csv")).string());
        write_events_csv(traj, (out / ("traj_" + base + "_events.csv")).string());

        std::printf("%s: initial MAE %.6f, final MAE %.6f, reduction %.1fx, %zu events\n",
                    variant_name(kind).c_str(), before, after, before / std::max(after, 1e-300),
                    traj.events.size());
    }
    std::printf("artifacts in %s\n", out.string().c_str());
    return 0;
}

int cmd_analyze(const CommonOpts& opt) {
    const ConnDims dims{4, 4, 4, 4, 2, 4};
    Occupancy occ;
    std::string name = opt.topology;
    if (opt.topology == "generic") {
        occ = generic_occupancy();
    } else {
        const TopologyTag tag = parse_topology(opt.topology);
        occ = mask_for_topology(tag);
        name = topology_name(tag);
    }
    const BoolMat d_a(dims.g_a, dims.u_a, true);
    const BoolMat d_b(dims.g_b, dims.u_b, true);
    const IncidenceMatrix inc = assemble_incidence(d_a, d_b, occ, dims);

    std::printf("incidence matrix (%s), worst-case submodel dependencies:\n%s\n", name.c_str(),
                render_ascii(inc).c_str());

    const auto comps = tarjan_scc(inc);
    std::printf("strongly connected components (reverse topological order):\n");
    for (const auto& comp : comps) {
        std::printf("  {");
        for (std::size_t i = 0; i < comp.size(); ++i) std::printf("%s%s", i ? ", " : "", eq_label(comp[i]));
        std::printf("}\n");
    }

    const BltResult blt = blt_sort(inc);
    if (blt.ok()) {
        std::string order;
        for (const auto& [eq, var] : blt.order->steps) {
            if (!order.empty()) order += ", ";
            order += eq_label(eq);
        }
        std::printf("loop-free; order: %s\n", order.c_str());
    } else {
        std::printf("algebraic loop(s): %s\n", blt.loops.describe().c_str());
    }

    const fs::path out = opt.out();
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> px;
    incidence_bitmap(inc, rows, cols, px);
    const fs::path pgm = out / ("incidence_" + name + ".pgm");
    write_pgm(pgm.string(), rows, cols, px);
    std::printf("bitmap written to %s\n", pgm.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"model composition and training for hybrid dynamic systems"};
    app.require_subcommand(1);

    CommonOpts e1, e2, an;
    e2.steps = 12000; // the variants need the larger displacement budget
    CLI::App* exp1 = app.add_subcommand("experiment1", "train a physics+network combination per topology");
    add_common(exp1, e1, true);
    CLI::App* exp2 = app.add_subcommand("experiment2", "train the four common-interface model variants");
    add_common(exp2, e2, false);
    CLI::App* ana = app.add_subcommand("analyze", "structural analysis of a topology (or 'generic')");
    add_common(ana, an, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (exp1->parsed()) return cmd_experiment1(e1);
        if (exp2->parsed()) return cmd_experiment2(e2);
        if (ana->parsed()) return cmd_analyze(an);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
