// bubblenet: regime calibration, speculative influence networks and loss analytics.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bubblenet/analysis.hpp"
#include "bubblenet/entropy.hpp"
#include "bubblenet/errors.hpp"
#include "bubblenet/hmm.hpp"
#include "bubblenet/io.hpp"
#include "bubblenet/model.hpp"
#include "bubblenet/network.hpp"
#include "bubblenet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bubblenet;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Hash of the effective arguments, so standalone outputs carry provenance too.
std::string args_hash(int argc, char** argv) {
    std::string joined;
    for (int i = 1; i < argc; ++i) joined += std::string(argv[i]) + "\n";
    return io::fnv1a_hex(joined);
}

network::NodeGroup groups_for(const std::vector<std::string>& ids, const std::vector<std::string>& financial) {
    const std::set<std::string> fin(financial.begin(), financial.end());
    for (const auto& f : fin) {
        if (std::find(ids.begin(), ids.end(), f) == ids.end()) {
            throw ConfigError("financial node '" + f + "' is not in the matrix");
        }
    }
    network::NodeGroup g;
    for (const auto& id : ids) {
        g.assign(id, fin.contains(id) ? network::Group::financial : network::Group::industrial);
    }
    return g;
}

// id in the first column, value in the last; header line skipped.
std::map<std::string, double> read_losses(const fs::path& path) {
    std::map<std::string, double> out;
    bool header = true;
    std::size_t number = 0;
    for (const auto& raw : io::split(io::read_text_file(path), '\n')) {
        ++number;
        const auto line = io::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const auto fields = io::split(line, ',');
        const auto v = io::parse_double(fields.back());
        if (fields.size() < 2 || !v) throw ParseError(path.string() + ": expected 'id,...,value'", number);
        out[io::trim(fields.front())] = *v;
    }
    return out;
}

ordered_json params_json(const hmm::FitResult& fit) {
    const auto& p = fit.params;
    ordered_json j;
    j["mu0"] = p.regime.mu0;
    j["sigma0"] = p.regime.sigma0;
    j["mu1"] = p.regime.mu1;
    j["sigma1"] = p.regime.sigma1;
    j["n"] = p.regime.n;
    j["kappa"] = p.regime.kappa;
    j["q"] = {{p.q[0][0], p.q[0][1]}, {p.q[1][0], p.q[1][1]}};
    j["loglik"] = fit.filter.loglik;
    j["iterations"] = fit.trace.iterations;
    j["converged"] = fit.trace.converged;
    return j;
}

struct SimulateArgs {
    model::SimulationConfig sim;
    std::size_t paths = 1;
    std::string out;
};

struct CalibrateArgs {
    std::string input;
    std::string asset = "asset";
    std::string config;
    std::string out = "calibration";
};

struct TeArgs {
    std::string probabilities;
    std::string out = "sii_matrix.csv";
    int bins = 10;
    double base = 10.0;
    double bubble_threshold = -1.0;
};

struct NetworkArgs {
    std::string matrix;
    std::vector<std::string> financial;
    double threshold = 0.3;
    std::string losses;
    std::string format = "graph-json";
    std::string out;
};

struct RegressArgs {
    std::string table;
    std::string y;
    std::vector<std::string> x;
    bool rank = false;
    bool no_intercept = false;
    std::string out;
};

struct ExportArgs {
    std::string graph;
    std::string format = "dot";
    std::string out;
};

int simulate(const SimulateArgs& a, const std::string& hash) {
    const io::Provenance prov{hash, "steps 0.." + std::to_string(a.sim.max_steps)};
    if (a.paths <= 1) {
        const auto path = model::simulate_sa_path(a.sim);
        std::string csv = io::provenance_header(prov) + "step,t,log_price\n";
        for (std::size_t k = 0; k < path.log_prices.size(); ++k) {
            csv += std::to_string(k) + "," + io::format_double(static_cast<double>(k) * a.sim.dt) + "," +
                   io::format_double(path.log_prices[k]) + "\n";
        }
        if (a.out.empty()) std::cout << csv; else io::write_text_file(a.out, csv);
        if (path.critical_time_index) {
            std::cerr << "critical point reached at step " << *path.critical_time_index << "\n";
        }
        return 0;
    }
    const auto ig = model::ig_params(a.sim.p0, a.sim.mu, a.sim.sigma, a.sim.n);
    std::string csv = io::provenance_header(prov) + "# inverse_gaussian_mean: " + io::format_double(ig.mean) +
                      "\n# inverse_gaussian_shape: " + io::format_double(ig.shape) + "\npath,hit,critical_time\n";
    for (std::size_t p = 0; p < a.paths; ++p) {
        auto cfg = a.sim;
        cfg.seed = a.sim.seed + p;
        const auto path = model::simulate_sa_path(cfg);
        csv += std::to_string(p) + "," + (path.hit_critical ? "1" : "0") + "," +
               (path.critical_time_index ? io::format_double(static_cast<double>(*path.critical_time_index) * cfg.dt)
                                         : std::string("")) +
               "\n";
    }
    if (a.out.empty()) std::cout << csv; else io::write_text_file(a.out, csv);
    return 0;
}

int calibrate(const CalibrateArgs& a, const std::string& hash) {
    io::KeyValueConfig kv;
    fs::path base = ".";
    if (!a.config.empty()) {
        kv = io::KeyValueConfig::load(a.config);
        base = fs::path(a.config).parent_path();
    }
    kv.set("assets", a.asset);
    kv.set("asset." + a.asset + ".path", fs::absolute(a.input).string());
    auto cfg = pipeline::PipelineConfig::from_kv(kv, base);
    const auto table = io::read_price_table(a.input, a.asset, cfg.columns);
    const auto series = pipeline::preprocess(table.log_series(), cfg.average_window, cfg.log_price_offset,
                                             cfg.window_start, cfg.window_end);
    const auto fit = hmm::em_fit(series, cfg.em);

    fs::create_directories(a.out);
    const io::Provenance prov{a.config.empty() ? hash : cfg.hash,
                              series.timestamps().front().iso() + ".." + series.timestamps().back().iso()};
    auto j = params_json(fit);
    j["config_hash"] = prov.config_hash;
    j["window"] = prov.window;
    io::write_text_file(fs::path(a.out) / (a.asset + ".params.json"), j.dump(2) + "\n");

    const auto filtered = fit.filter.bubble_probability();
    const auto smoothed = fit.smoother.bubble_probability();
    std::string csv = io::provenance_header(prov) + "date,log_price,filtered,smoothed\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
        csv += series.timestamps()[t].iso() + "," + io::format_double(series[t]) + "," +
               io::format_double(filtered[t]) + "," + io::format_double(smoothed[t]) + "\n";
    }
    io::write_text_file(fs::path(a.out) / (a.asset + ".probabilities.csv"), csv);
    std::cout << a.asset << ": n=" << fit.params.regime.n << " loglik=" << fit.filter.loglik
              << " iterations=" << fit.trace.iterations << (fit.trace.converged ? "" : " (not converged)") << "\n";
    return 0;
}

int transfer(const TeArgs& a, const std::string& hash) {
    const auto text = io::read_text_file(a.probabilities);
    const auto probs = io::parse_probability_table(text);
    te::SiiOptions opts;
    opts.bin_count = a.bins;
    opts.base = a.base;
    if (a.bubble_threshold >= 0.0) opts.bubble_day_threshold = a.bubble_threshold;
    const auto m = te::sii_matrix(probs, opts);
    io::write_text_file(a.out, io::format_sii_matrix(m, {hash, m.window()}));
    return 0;
}

int indicators(const std::string& matrix_path, const std::vector<std::string>& financial, const std::string& out,
               const std::string& hash) {
    const auto m = io::parse_sii_matrix(io::read_text_file(matrix_path));
    const auto groups = groups_for(m.ids(), financial);
    const auto table = network::compute_indicators(m, groups);
    const auto text = io::format_indicator_table(table, groups, {hash, m.window()});
    if (out.empty()) std::cout << text; else io::write_text_file(out, text);
    return 0;
}

int build_network(const NetworkArgs& a, const std::string& hash) {
    const auto format = io::parse_graph_format(a.format);
    const auto m = io::parse_sii_matrix(io::read_text_file(a.matrix));
    const auto groups = groups_for(m.ids(), a.financial);
    std::optional<std::map<std::string, double>> losses;
    if (!a.losses.empty()) losses = read_losses(a.losses);
    const auto g = network::build_sin(m, groups, a.threshold, losses ? &*losses : nullptr);
    const auto text = io::format_graph(g, format, {hash, m.window()});
    if (a.out.empty()) std::cout << text; else io::write_text_file(a.out, text);
    return 0;
}

int regress(const RegressArgs& a) {
    const auto text = io::read_text_file(a.table);
    std::vector<std::vector<std::string>> rows;
    for (const auto& raw : io::split(text, '\n')) {
        const auto line = io::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto fields = io::split(line, ',');
        for (auto& f : fields) f = io::trim(f);
        rows.push_back(std::move(fields));
    }
    if (rows.size() < 2) throw ParseError(a.table + ": table needs a header and data rows", 0);
    const auto& header = rows.front();
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError(a.table + ": missing column '" + name + "'", 1);
        std::vector<double> values;
        const auto c = static_cast<std::size_t>(it - header.begin());
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto v = c < rows[r].size() ? io::parse_double(rows[r][c]) : std::nullopt;
            if (!v) throw ParseError(a.table + ": bad value in column '" + name + "'", 0);
            values.push_back(*v);
        }
        return a.rank ? analysis::rank_transform(values) : values;
    };
    const auto yv = column(a.y);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
    Eigen::MatrixXd X(y.size(), static_cast<Eigen::Index>(a.x.size()));
    for (std::size_t c = 0; c < a.x.size(); ++c) {
        const auto col = column(a.x[c]);
        X.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(col.data(), y.size());
    }
    const auto res = analysis::ols_regress(y, X, !a.no_intercept, a.x);

    ordered_json j;
    auto coef = [](const analysis::Coefficient& c) {
        return ordered_json{{"name", c.name}, {"estimate", c.estimate}, {"std_error", c.std_error},
                            {"t", c.t_stat}, {"p_value", c.p_value}, {"stars", c.stars}};
    };
    j["coefficients"] = ordered_json::array();
    for (const auto& c : res.coefficients) j["coefficients"].push_back(coef(c));
    if (res.intercept) j["intercept"] = coef(*res.intercept);
    j["r_squared"] = res.r_squared;
    j["adj_r_squared"] = res.adj_r_squared;
    j["f_statistic"] = std::isfinite(res.f_statistic) ? ordered_json(res.f_statistic) : ordered_json(nullptr);
    j["f_p_value"] = res.f_p_value;
    j["observations"] = res.observations;
    if (!a.out.empty()) io::write_text_file(a.out, j.dump(2) + "\n");

    for (const auto& c : res.coefficients) {
        std::printf("%-16s %10.2f%-3s (%.2f)\n", c.name.c_str(), c.estimate, c.stars.c_str(), c.std_error);
    }
    std::printf("R2 %.2f  adj R2 %.2f  F %.2f  n %zu\n", res.r_squared, res.adj_r_squared, res.f_statistic,
                res.observations);
    return 0;
}

int export_graph(const ExportArgs& a) {
    const auto format = io::parse_graph_format(a.format);
    const auto imported = io::parse_graph_json(io::read_text_file(a.graph));
    const auto text = io::format_graph(imported.graph, format, imported.provenance);
    if (a.out.empty()) std::cout << text; else io::write_text_file(a.out, text);
    return 0;
}

int run(const std::string& config_path) {
    const auto cfg = pipeline::load_config(config_path);
    const auto report = pipeline::run_pipeline(cfg);
    std::size_t failed = 0;
    for (const auto& o : report.assets) {
        if (!o.ok) {
            ++failed;
            std::cerr << "asset " << o.id << " failed: " << o.error << "\n";
        }
    }
    std::cout << "wrote " << report.files.size() << " files to " << cfg.output_dir.string() << " ("
              << report.assets.size() - failed << " of " << report.assets.size() << " assets calibrated)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bubble regime calibration and speculative influence networks"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate super-exponential price paths");
    s->add_option("--p0", sim.sim.p0, "Initial price")->capture_default_str();
    s->add_option("--mu", sim.sim.mu, "Drift")->capture_default_str();
    s->add_option("--sigma", sim.sim.sigma, "Volatility")->capture_default_str();
    s->add_option("--n", sim.sim.n, "Feedback exponent")->capture_default_str();
    s->add_option("--dt", sim.sim.dt, "Time step")->capture_default_str();
    s->add_option("--steps", sim.sim.max_steps, "Maximum number of steps")->capture_default_str();
    s->add_option("--seed", sim.sim.seed, "Random seed")->capture_default_str();
    s->add_option("--paths", sim.paths, "Paths; above 1 writes critical times only")->capture_default_str();
    s->add_option("-o,--out", sim.out, "Output CSV (stdout when omitted)");

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Fit the two-regime model to one price file");
    c->add_option("-i,--input", cal.input, "Price CSV")->required()->check(CLI::ExistingFile);
    c->add_option("-a,--asset", cal.asset, "Asset id")->capture_default_str();
    c->add_option("-c,--config", cal.config, "Key-value config for EM and preprocessing")->check(CLI::ExistingFile);
    c->add_option("-o,--out", cal.out, "Output directory")->capture_default_str();

    TeArgs tea;
    auto* t = app.add_subcommand("te", "SII matrix from a wide probability table");
    t->add_option("-p,--probabilities", tea.probabilities, "CSV with date and one column per asset")
        ->required()
        ->check(CLI::ExistingFile);
    t->add_option("-o,--out", tea.out, "Output matrix CSV")->capture_default_str();
    t->add_option("--bins", tea.bins, "Equal-width bins on [0,1]")->capture_default_str();
    t->add_option("--base", tea.base, "Logarithm base")->capture_default_str();
    t->add_option("--bubble-threshold", tea.bubble_threshold,
                  "Only use transitions where both probabilities stay at or above this value");

    std::string ind_matrix;
    std::string ind_out;
    std::vector<std::string> ind_fin;
    auto* ind = app.add_subcommand("indicators", "Node indicators from an SII matrix");
    ind->add_option("-m,--matrix", ind_matrix, "SII matrix CSV")->required()->check(CLI::ExistingFile);
    ind->add_option("-f,--financial", ind_fin, "Financial node ids (others are industrial)")->delimiter(',');
    ind->add_option("-o,--out", ind_out, "Output CSV (stdout when omitted)");

    NetworkArgs net;
    auto* n = app.add_subcommand("network", "Thresholded influence network from an SII matrix");
    n->add_option("-m,--matrix", net.matrix, "SII matrix CSV")->required()->check(CLI::ExistingFile);
    n->add_option("-f,--financial", net.financial, "Financial node ids")->delimiter(',');
    n->add_option("--threshold", net.threshold, "Minimum NSII")->capture_default_str();
    n->add_option("--losses", net.losses, "CSV with id first and loss percentage last")->check(CLI::ExistingFile);
    n->add_option("--format", net.format, "dot or graph-json")->capture_default_str();
    n->add_option("-o,--out", net.out, "Output file (stdout when omitted)");

    RegressArgs reg;
    auto* r = app.add_subcommand("regress", "OLS of one table column on others");
    r->add_option("-t,--table", reg.table, "CSV with a header row")->required()->check(CLI::ExistingFile);
    r->add_option("-y", reg.y, "Response column")->required();
    r->add_option("-x", reg.x, "Regressor columns")->required()->delimiter(',');
    r->add_flag("--rank", reg.rank, "Rank-transform every column first");
    r->add_flag("--no-intercept", reg.no_intercept, "Fit without an intercept");
    r->add_option("-o,--out", reg.out, "JSON report");

    std::string run_config;
    auto* ru = app.add_subcommand("run", "Full pipeline from a config file");
    ru->add_option("-c,--config", run_config, "Key-value config")->required()->check(CLI::ExistingFile);

    ExportArgs ex;
    auto* e = app.add_subcommand("export", "Re-export a graph-JSON file");
    e->add_option("-g,--graph", ex.graph, "graph-JSON input")->required()->check(CLI::ExistingFile);
    e->add_option("--format", ex.format, "dot or graph-json")->capture_default_str();
    e->add_option("-o,--out", ex.out, "Output file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return kExitValidation;
    }

    const auto hash = args_hash(argc, argv);
    try {
        if (*s) return simulate(sim, hash);
        if (*c) return calibrate(cal, hash);
        if (*t) return transfer(tea, hash);
        if (*ind) return indicators(ind_matrix, ind_fin, ind_out, hash);
        if (*n) return build_network(net, hash);
        if (*r) return regress(reg);
        if (*ru) return run(run_config);
        if (*e) return export_graph(ex);
    } catch (const InvalidArgument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& err) {
        std::cerr << "input error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const LookupError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& err) {
        std::cerr << "failed: " << err.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}
