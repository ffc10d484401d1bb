#include "bubblenet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bubblenet/errors.hpp"

namespace bubblenet::pipeline {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* kDefaultCorrelations =
    "NSII-on-IX; NSII-on-IX - SI-from-Fin; NSII-on-Fin - SI-from-IX; NSII-on-IX + SI-to-Fin; NSII-on-Fin + SI-to-IX";
const char* kDefaultModels = "SI-from-All; SI-to-IX; SI-from-IX; NSII-on-IX; SI-to-IX, SI-from-IX";

std::vector<std::string> list(const std::string& text, char sep) {
    std::vector<std::string> out;
    for (const auto& item : io::split(text, sep)) {
        auto t = io::trim(item);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<std::string>> models(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    for (const auto& model : list(text, ';')) out.push_back(list(model, ','));
    return out;
}

std::optional<Date> date_key(const io::KeyValueConfig& kv, const std::string& key) {
    const auto text = kv.get(key, "");
    if (text.empty()) return std::nullopt;
    try {
        return Date::parse(text);
    } catch (const InvalidArgument& e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string fixed2(double v) {
    if (!std::isfinite(v)) return io::format_double(v);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string window_text(std::span<const Date> dates) {
    return dates.empty() ? "" : dates.front().iso() + ".." + dates.back().iso();
}

struct Calibrated {
    std::string id;
    LogPriceSeries series;
    hmm::FitResult fit;
};

Calibrated calibrate(const io::PriceTable& table, const std::vector<Date>& common, const PipelineConfig& config) {
    std::vector<double> logs;
    std::size_t k = 0;
    for (const Date& d : common) {
        while (table.dates[k] < d) ++k;
        logs.push_back(std::log(table.prices[k]));
    }
    const LogPriceSeries raw(table.asset_id, common, std::move(logs));
    auto series = preprocess(raw, config.average_window, config.log_price_offset, config.window_start,
                             config.window_end);
    auto fit = hmm::em_fit(series, config.em);
    return {table.asset_id, std::move(series), std::move(fit)};
}

ordered_json coefficient_json(const analysis::Coefficient& c) {
    ordered_json j;
    j["name"] = c.name;
    j["estimate"] = number(c.estimate);
    j["std_error"] = number(c.std_error);
    j["t"] = number(c.t_stat);
    j["p_value"] = number(c.p_value);
    j["stars"] = c.stars;
    return j;
}

}  // namespace

PipelineConfig PipelineConfig::from_kv(const io::KeyValueConfig& kv, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    const auto input_dir = base_dir / kv.get("input.dir", ".");
    std::vector<std::string> ids = list(kv.get("assets", ""), ',');
    if (ids.empty() && std::filesystem::is_directory(input_dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
            if (entry.path().extension() == ".csv") ids.push_back(entry.path().stem().string());
        }
        std::sort(ids.begin(), ids.end());
    }
    for (const auto& id : ids) {
        AssetSpec a;
        a.id = id;
        a.path = input_dir / kv.get("asset." + id + ".path", id + ".csv");
        a.group = network::parse_group(kv.get("asset." + id + ".group", "industrial"));
        a.subsector = kv.get("asset." + id + ".subsector", "");
        c.assets.push_back(std::move(a));
    }
    c.columns.date = kv.get("columns.date", "date");
    c.columns.price = kv.get("columns.price", "price");
    c.columns.market_cap = kv.get("columns.market_cap", "market_cap");
    c.window_start = date_key(kv, "window.start");
    c.window_end = date_key(kv, "window.end");
    c.loss_start = date_key(kv, "loss.start");
    c.loss_end = date_key(kv, "loss.end");

    const auto avg = kv.get_int("preprocess.average_window", 100);
    if (avg < 0) throw ConfigError("preprocess.average_window must be non-negative");
    c.average_window = static_cast<std::size_t>(avg);
    c.log_price_offset = kv.get_double("preprocess.log_price_offset", 0.0);

    c.em.tolerance = kv.get_double("em.tolerance", c.em.tolerance);
    const auto iters = kv.get_int("em.max_iterations", static_cast<long long>(c.em.max_iterations));
    if (iters < 1) throw ConfigError("em.max_iterations must be at least 1");
    c.em.max_iterations = static_cast<std::size_t>(iters);
    c.em.n_search.n_min = kv.get_double("em.n_min", c.em.n_search.n_min);
    c.em.n_search.n_max = kv.get_double("em.n_max", c.em.n_search.n_max);
    c.em.kappa = kv.get_double("em.kappa", c.em.kappa);
    c.em.q00 = kv.get_double("em.q00", c.em.q00);
    c.em.q11 = kv.get_double("em.q11", c.em.q11);
    c.em.initial_n = kv.get_double("em.initial_n", c.em.initial_n);
    const auto rule = kv.get("em.smoother", "exact");
    if (rule == "exact") c.em.smoother_rule = hmm::SmootherRule::exact_pairwise;
    else if (rule == "prediction") c.em.smoother_rule = hmm::SmootherRule::kim_prediction;
    else throw ConfigError("em.smoother must be 'exact' or 'prediction', got '" + rule + "'");

    c.te.bin_count = static_cast<int>(kv.get_int("te.bins", 10));
    c.te.base = kv.get_double("te.base", 10.0);
    if (kv.has("te.bubble_day_threshold") && !kv.get("te.bubble_day_threshold", "").empty()) {
        c.te.bubble_day_threshold = kv.get_double("te.bubble_day_threshold", 0.5);
    }
    c.threshold = kv.get_double("network.threshold", 0.3);
    c.regress_industrial = models(kv.get("regress.industrial", kDefaultModels));
    c.regress_financial = models(kv.get("regress.financial", kDefaultModels));
    c.correlate_industrial = list(kv.get("correlate.industrial", kDefaultCorrelations), ';');
    c.correlate_financial = list(kv.get("correlate.financial", kDefaultCorrelations), ';');
    c.output_dir = base_dir / kv.get("output.dir", "out");
    const auto seed = kv.get_int("seed", 0);
    if (seed < 0) throw ConfigError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    // Where results land does not change what they are.
    auto hashed = kv;
    hashed.erase("output.dir");
    c.hash = io::fnv1a_hex(hashed.canonical());
    return c;
}

void PipelineConfig::validate() const {
    if (assets.empty()) throw ConfigError("no assets configured");
    std::set<std::string> seen;
    for (const auto& a : assets) {
        if (!seen.insert(a.id).second) throw ConfigError("asset '" + a.id + "' listed twice");
        if (!std::filesystem::exists(a.path)) {
            throw ConfigError("input file for asset '" + a.id + "' not found: " + a.path.string());
        }
    }
    if (window_start && window_end && !(*window_start < *window_end)) {
        throw ConfigError("analysis window end " + window_end->iso() + " is not after its start " +
                          window_start->iso());
    }
    if (loss_start.has_value() != loss_end.has_value()) {
        throw ConfigError("loss window needs both loss.start and loss.end");
    }
    if (loss_start && !(*loss_start < *loss_end)) {
        throw ConfigError("loss window end " + loss_end->iso() + " is not after its start " + loss_start->iso());
    }
    if (te.bin_count < 2) throw ConfigError("te.bins must be at least 2");
    if (!(te.base > 0.0) || te.base == 1.0) throw ConfigError("te.base must be positive and not 1");
    if (!(threshold >= 0.0)) throw ConfigError("network.threshold must be non-negative");
    if (!std::isfinite(log_price_offset)) throw ConfigError("preprocess.log_price_offset must be finite");
    try {
        em.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("EM settings: ") + e.what());
    }
    network::NodeIndicators probe;
    for (const auto* group : {&regress_industrial, &regress_financial}) {
        for (const auto& model : *group) {
            for (const auto& expr : model) evaluate_indicator_expression(probe, expr);
        }
    }
    for (const auto* group : {&correlate_industrial, &correlate_financial}) {
        for (const auto& expr : *group) evaluate_indicator_expression(probe, expr);
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    const auto kv = io::KeyValueConfig::load(path);
    return PipelineConfig::from_kv(kv, path.parent_path());
}

double evaluate_indicator_expression(const network::NodeIndicators& row, const std::string& expression) {
    std::istringstream in(expression);
    std::string token;
    double total = 0.0;
    double sign = 1.0;
    bool expect_term = true;
    while (in >> token) {
        if (token == "+" || token == "-") {
            if (expect_term) throw ConfigError("malformed indicator expression '" + expression + "'");
            sign = token == "+" ? 1.0 : -1.0;
            expect_term = true;
            continue;
        }
        if (!expect_term) throw ConfigError("malformed indicator expression '" + expression + "'");
        while (!token.empty() && token.front() == '(') token.erase(0, 1);
        while (!token.empty() && token.back() == ')') token.pop_back();
        try {
            total += sign * network::indicator_value(row, token);
        } catch (const LookupError& e) {
            throw ConfigError(std::string(e.what()) + " in expression '" + expression + "'");
        }
        expect_term = false;
    }
    if (expect_term) throw ConfigError("malformed indicator expression '" + expression + "'");
    return total;
}

LogPriceSeries preprocess(const LogPriceSeries& raw, std::size_t average_window, double offset,
                          std::optional<Date> start, std::optional<Date> end) {
    const auto dates = raw.timestamps();
    const Date last = end.value_or(dates.back());
    std::vector<Date> kept;
    std::vector<double> logs;
    for (std::size_t t = 0; t < raw.size() && dates[t] <= last; ++t) {
        kept.push_back(dates[t]);
        logs.push_back(raw[t] + offset);
    }
    if (kept.size() < 2) {
        throw InsufficientData("series '" + raw.asset_id() + "' has fewer than 2 points up to " + last.iso());
    }
    LogPriceSeries shifted(raw.asset_id(), std::move(kept), std::move(logs));
    if (average_window > 1) shifted = hmm::geometric_average_filter(shifted, average_window);
    const Date first = start.value_or(shifted.timestamps().front());
    return shifted.clip(first, last);
}

RunReport run_pipeline(const PipelineConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.output_dir / "assets", ec);
    if (ec) throw IoError("cannot create output directory '" + config.output_dir.string() + "': " + ec.message());

    RunReport report;
    std::map<std::string, std::string> failures;
    auto fail = [&](const std::string& id, const std::string& why) { failures.emplace(id, why); };

    // Load.
    std::vector<io::PriceTable> tables;
    for (const auto& a : config.assets) {
        try {
            tables.push_back(io::read_price_table(a.path, a.id, config.columns));
        } catch (const Error& e) {
            fail(a.id, e.what());
        }
    }

    // Dates shared by every loaded asset.
    std::vector<Date> common;
    if (!tables.empty()) {
        common = tables.front().dates;
        for (std::size_t k = 1; k < tables.size(); ++k) {
            std::vector<Date> next;
            std::set_intersection(common.begin(), common.end(), tables[k].dates.begin(), tables[k].dates.end(),
                                  std::back_inserter(next));
            common = std::move(next);
        }
    }

    // Calibrate, one independent task per asset.
    std::vector<std::future<Calibrated>> tasks;
    for (const auto& table : tables) {
        tasks.push_back(std::async(std::launch::async, [&table, &common, &config] {
            return calibrate(table, common, config);
        }));
    }
    std::vector<Calibrated> fitted;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        try {
            fitted.push_back(tasks[k].get());
        } catch (const Error& e) {
            fail(tables[k].asset_id, e.what());
        }
    }

    const std::string window = fitted.empty() ? "" : window_text(fitted.front().series.timestamps());
    const io::Provenance prov{config.hash, window};
    auto write = [&](const std::string& name, const std::string& content) {
        io::write_text_file(config.output_dir / name, content);
        report.files.push_back(name);
    };

    for (const auto& c : fitted) {
        ordered_json params;
        params["config_hash"] = prov.config_hash;
        params["window"] = prov.window;
        params["asset"] = c.id;
        const auto& p = c.fit.params;
        params["mu0"] = p.regime.mu0;
        params["sigma0"] = p.regime.sigma0;
        params["mu1"] = p.regime.mu1;
        params["sigma1"] = p.regime.sigma1;
        params["n"] = p.regime.n;
        params["kappa"] = p.regime.kappa;
        params["q"] = {{p.q[0][0], p.q[0][1]}, {p.q[1][0], p.q[1][1]}};
        params["loglik"] = number(c.fit.filter.loglik);
        params["iterations"] = c.fit.trace.iterations;
        params["converged"] = c.fit.trace.converged;
        ordered_json trace = ordered_json::array();
        for (const auto& r : c.fit.trace.records) trace.push_back(number(r.loglik));
        params["loglik_trace"] = trace;
        const auto filtered = c.fit.filter.bubble_probability();
        const auto fractions = hmm::threshold_fractions(hmm::bubble_series(c.series, filtered));
        params["bubble_time_percent"] = hmm::bubble_time_fraction(hmm::bubble_series(c.series, filtered));
        params["percent_above_0.9"] = fractions.high_percent;
        params["percent_below_0.1"] = fractions.low_percent;
        write("assets/" + c.id + ".params.json", params.dump(2) + "\n");

        const auto smoothed = c.fit.smoother.bubble_probability();
        std::string csv = io::provenance_header(prov) + "date,log_price,filtered,smoothed\n";
        for (std::size_t t = 0; t < c.series.size(); ++t) {
            csv += c.series.timestamps()[t].iso() + "," + io::format_double(c.series[t]) + "," +
                   io::format_double(filtered[t]) + "," + io::format_double(smoothed[t]) + "\n";
        }
        write("assets/" + c.id + ".probabilities.csv", csv);
    }

    for (const auto& a : config.assets) {
        AssetOutcome o;
        o.id = a.id;
        if (const auto it = failures.find(a.id); it != failures.end()) {
            o.error = it->second;
        } else {
            const auto& c = *std::find_if(fitted.begin(), fitted.end(), [&](const auto& f) { return f.id == a.id; });
            o.ok = true;
            o.iterations = c.fit.trace.iterations;
            o.converged = c.fit.trace.converged;
            o.loglik = c.fit.filter.loglik;
        }
        report.assets.push_back(std::move(o));
    }

    auto write_report = [&] {
        ordered_json doc;
        doc["config_hash"] = prov.config_hash;
        doc["window"] = prov.window;
        doc["seed"] = config.seed;
        ordered_json assets = ordered_json::array();
        for (const auto& o : report.assets) {
            ordered_json j;
            j["id"] = o.id;
            j["status"] = o.ok ? "ok" : "failed";
            if (o.ok) {
                j["iterations"] = o.iterations;
                j["converged"] = o.converged;
                j["loglik"] = number(o.loglik);
            } else {
                j["error"] = o.error;
            }
            assets.push_back(std::move(j));
        }
        doc["assets"] = assets;
        doc["notes"] = report.notes;
        report.files.push_back("run_report.json");
        doc["files"] = report.files;
        io::write_text_file(config.output_dir / "run_report.json", doc.dump(2) + "\n");
    };

    if (fitted.size() < 2) {
        report.notes.push_back("fewer than two assets calibrated; cross-asset outputs skipped");
        write_report();
        throw PipelineFailure("only " + std::to_string(fitted.size()) +
                              " asset(s) calibrated, at least 2 are needed; see run_report.json");
    }

    std::vector<ProbabilitySeries> probs;
    network::NodeGroup groups;
    for (const auto& c : fitted) {
        probs.push_back(hmm::bubble_series(c.series, c.fit.filter.bubble_probability()));
        const auto& asset = *std::find_if(config.assets.begin(), config.assets.end(),
                                         [&](const AssetSpec& a) { return a.id == c.id; });
        groups.assign(c.id, asset.group, asset.subsector);
    }
    write("filtered_probabilities.csv", io::format_probability_table(probs, prov));

    const auto matrix = te::sii_matrix(probs, config.te);
    write("sii_matrix.csv", io::format_sii_matrix(matrix, prov));
    const auto indicators = network::compute_indicators(matrix, groups);
    write("indicators.csv", io::format_indicator_table(indicators, groups, prov));

    // Losses over the loss window, from market cap when the file has it.
    std::optional<std::map<std::string, double>> losses;
    if (config.loss_start) {
        losses.emplace();
        for (const auto& c : fitted) {
            const auto& table = *std::find_if(tables.begin(), tables.end(),
                                              [&](const io::PriceTable& t) { return t.asset_id == c.id; });
            const auto& source = table.market_cap ? *table.market_cap : table.prices;
            std::vector<double> values;
            for (std::size_t t = 0; t < table.dates.size(); ++t) {
                if (*config.loss_start <= table.dates[t] && table.dates[t] <= *config.loss_end) {
                    values.push_back(source[t]);
                }
            }
            if (values.size() < 2) {
                report.notes.push_back("asset '" + c.id + "' has fewer than 2 points in the loss window");
                losses.reset();
                break;
            }
            (*losses)[c.id] = analysis::max_loss(values);
        }
    }
    if (losses) {
        std::string csv = io::provenance_header({prov.config_hash, config.loss_start->iso() + ".." +
                                                                       config.loss_end->iso()}) +
                          "id,group,max_loss_percent\n";
        for (const auto& c : fitted) {
            csv += c.id + "," + network::to_string(groups.of(c.id)) + "," + io::format_double(losses->at(c.id)) + "\n";
        }
        write("losses.csv", csv);
    }

    const auto graph = network::build_sin(matrix, groups, config.threshold, losses ? &*losses : nullptr);
    write("graph.dot", io::format_graph(graph, io::GraphFormat::dot, prov));
    write("graph.json", io::format_graph(graph, io::GraphFormat::graph_json, prov));

    std::string summary = "config_hash: " + prov.config_hash + "\nwindow: " + prov.window + "\n\n";
    summary += "asset          bubble%   >0.9%   <0.1%       n\n";
    for (const auto& c : fitted) {
        const auto s = hmm::bubble_series(c.series, c.fit.filter.bubble_probability());
        const auto f = hmm::threshold_fractions(s);
        char line[160];
        std::snprintf(line, sizeof line, "%-12s %9s %7s %7s %7s\n", c.id.c_str(),
                      fixed2(hmm::bubble_time_fraction(s)).c_str(), fixed2(f.high_percent).c_str(),
                      fixed2(f.low_percent).c_str(), fixed2(c.fit.params.regime.n).c_str());
        summary += line;
    }

    if (losses) {
        ordered_json regressions = ordered_json::array();
        ordered_json correlation_doc = ordered_json::array();
        for (const auto group : {network::Group::industrial, network::Group::financial}) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < indicators.ids.size(); ++i) {
                if (groups.of(indicators.ids[i]) == group) members.push_back(i);
            }
            std::vector<double> loss_values;
            for (auto i : members) loss_values.push_back(losses->at(indicators.ids[i]));
            const auto loss_rank = analysis::rank_transform(loss_values);

            const auto& group_models =
                group == network::Group::industrial ? config.regress_industrial : config.regress_financial;
            summary += "\nregressions of ranked %MaxLoss, " + network::to_string(group) + " nodes (" +
                       std::to_string(members.size()) + ")\n";
            for (const auto& model : group_models) {
                ordered_json j;
                j["group"] = network::to_string(group);
                j["regressors"] = model;
                std::string label;
                for (const auto& m : model) label += (label.empty() ? "" : ", ") + m;
                try {
                    Eigen::MatrixXd X(static_cast<Eigen::Index>(members.size()), static_cast<Eigen::Index>(model.size()));
                    for (std::size_t c = 0; c < model.size(); ++c) {
                        std::vector<double> col;
                        for (auto i : members) col.push_back(evaluate_indicator_expression(indicators.rows[i], model[c]));
                        const auto ranked = analysis::rank_transform(col);
                        for (std::size_t r = 0; r < ranked.size(); ++r) {
                            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ranked[r];
                        }
                    }
                    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(loss_rank.data(),
                                                                                static_cast<Eigen::Index>(loss_rank.size()));
                    const auto res = analysis::ols_regress(y, X, true, model);
                    j["status"] = "ok";
                    ordered_json coefs = ordered_json::array();
                    for (const auto& c : res.coefficients) coefs.push_back(coefficient_json(c));
                    j["coefficients"] = coefs;
                    j["intercept"] = coefficient_json(*res.intercept);
                    j["r_squared"] = number(res.r_squared);
                    j["adj_r_squared"] = number(res.adj_r_squared);
                    j["f_statistic"] = number(res.f_statistic);
                    j["f_p_value"] = number(res.f_p_value);
                    j["observations"] = res.observations;
                    summary += "  [" + label + "]";
                    for (const auto& c : res.coefficients) summary += " " + c.name + "=" + fixed2(c.estimate) + c.stars;
                    summary += " R2=" + fixed2(res.r_squared) + " adjR2=" + fixed2(res.adj_r_squared) +
                               " F=" + fixed2(res.f_statistic) + "\n";
                } catch (const Error& e) {
                    j["status"] = "skipped";
                    j["reason"] = e.what();
                    summary += "  [" + label + "] skipped: " + e.what() + "\n";
                }
                regressions.push_back(std::move(j));
            }

            const auto& exprs =
                group == network::Group::industrial ? config.correlate_industrial : config.correlate_financial;
            summary += "\ncorrelations with %MaxLoss, " + network::to_string(group) + " nodes\n";
            for (const auto& expr : exprs) {
                std::vector<double> values;
                for (auto i : members) values.push_back(evaluate_indicator_expression(indicators.rows[i], expr));
                ordered_json j;
                j["group"] = network::to_string(group);
                j["indicator"] = expr;
                std::string line = "  " + expr + ":";
                auto stat = [&](const char* name, double (*fn)(std::span<const double>, std::span<const double>)) {
                    try {
                        const double v = fn(values, loss_values);
                        j[name] = v;
                        line += std::string(" ") + name + "=" + fixed2(v);
                    } catch (const Error& e) {
                        j[name] = nullptr;
                        j[std::string(name) + "_error"] = e.what();
                        line += std::string(" ") + name + "=undefined";
                    }
                };
                stat("pearson", analysis::pearson);
                stat("spearman", analysis::spearman);
                stat("kendall", analysis::kendall);
                summary += line + "\n";
                correlation_doc.push_back(std::move(j));
            }
        }
        ordered_json doc;
        doc["config_hash"] = prov.config_hash;
        doc["window"] = prov.window;
        doc["regressions"] = regressions;
        write("regressions.json", doc.dump(2) + "\n");
        doc.erase("regressions");
        doc["correlations"] = correlation_doc;
        write("correlations.json", doc.dump(2) + "\n");
    } else {
        report.notes.push_back("no loss window configured; regressions and correlations skipped");
    }

    summary += "\nnetwork: " + std::to_string(graph.edges.size()) + " edges at NSII >= " + fixed2(config.threshold) + "\n";
    for (const auto& e : graph.edges) {
        summary += "  " + e.source + " -> " + e.target + "  NSII " + fixed2(e.nsii) + "  weight " + fixed2(e.weight) + "\n";
    }
    write("summary.txt", summary);
    write_report();
    return report;
}

}  // namespace bubblenet::pipeline
