#include "bubblenet/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "bubblenet/errors.hpp"

namespace bubblenet::io {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string strip_quotes(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> csv_fields(std::string_view line) {
    std::vector<std::string> out;
    for (auto& f : split(line, ',')) out.push_back(strip_quotes(trim(f)));
    return out;
}

bool skippable(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

// Lines paired with their 1-based numbers, comments and blanks removed.
std::vector<std::pair<std::size_t, std::string>> content_lines(const std::string& text) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!skippable(line)) out.emplace_back(number, line);
    }
    return out;
}

std::optional<std::string> comment_value(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    const std::string prefix = "# " + key + ": ";
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    }
    return std::nullopt;
}

}  // namespace

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return "";
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            return out;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view text) {
    const auto t = trim(text);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = t.data();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LogPriceSeries PriceTable::log_series() const {
    std::vector<double> logs(prices.size());
    std::transform(prices.begin(), prices.end(), logs.begin(), [](double p) { return std::log(p); });
    return LogPriceSeries(asset_id, dates, std::move(logs));
}

PriceTable read_price_table(const std::filesystem::path& path, const std::string& asset_id,
                            const ColumnMap& columns) {
    const auto text = read_text_file(path);
    const auto lines = content_lines(text);
    if (lines.empty()) throw ParseError(path.string() + ": file has no header", 0);

    const auto header = csv_fields(lines.front().second);
    const auto date_col = find_column(header, columns.date);
    if (!date_col) throw ParseError(path.string() + ": missing column '" + columns.date + "'", lines.front().first);
    const auto price_col = find_column(header, columns.price);
    if (!price_col) throw ParseError(path.string() + ": missing column '" + columns.price + "'", lines.front().first);
    const auto cap_col = find_column(header, columns.market_cap);

    struct Row {
        Date date;
        double price;
        double cap;
        std::size_t line;
    };
    std::vector<Row> rows;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [number, line] = lines[k];
        const auto fields = csv_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError(path.string() + ": expected " + std::to_string(header.size()) + " fields", number);
        }
        Date date;
        try {
            date = Date::parse(fields[*date_col]);
        } catch (const InvalidArgument& e) {
            throw ParseError(path.string() + ": " + e.what(), number);
        }
        const auto price = parse_double(fields[*price_col]);
        if (!price || !std::isfinite(*price)) {
            throw ParseError(path.string() + ": unparseable price '" + fields[*price_col] + "'", number);
        }
        if (!(*price > 0.0)) {
            throw ParseError(path.string() + ": non-positive price " + fields[*price_col], number);
        }
        double cap = 0.0;
        if (cap_col) {
            const auto parsed = parse_double(fields[*cap_col]);
            if (!parsed || !(*parsed > 0.0) || !std::isfinite(*parsed)) {
                throw ParseError(path.string() + ": invalid market cap '" + fields[*cap_col] + "'", number);
            }
            cap = *parsed;
        }
        rows.push_back({date, *price, cap, number});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (rows[k].date == rows[k - 1].date) {
            throw ParseError(path.string() + ": duplicate date " + rows[k].date.iso() + " (also on line " +
                                 std::to_string(rows[k - 1].line) + ")",
                             rows[k].line);
        }
    }

    PriceTable table;
    table.asset_id = asset_id;
    for (const auto& r : rows) {
        table.dates.push_back(r.date);
        table.prices.push_back(r.price);
    }
    if (cap_col) {
        table.market_cap.emplace();
        for (const auto& r : rows) table.market_cap->push_back(r.cap);
    }
    return table;
}

LogPriceSeries load_price_csv(const std::filesystem::path& path, const std::string& asset_id,
                              const ColumnMap& columns) {
    return read_price_table(path, asset_id, columns).log_series();
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& source) {
    KeyValueConfig cfg;
    cfg.source_ = source;
    std::size_t number = 0;
    for (const auto& raw : split(text, '\n')) {
        ++number;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source + ": expected 'key = value'", number);
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(source + ": empty key", number);
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    return parse(read_text_file(path), path.string());
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto v = parse_double(it->second);
    if (!v) throw ConfigError(source_ + ": key '" + key + "' expects a number, got '" + it->second + "'");
    return *v;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError(source_ + ": key '" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

std::string KeyValueConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string provenance_header(const Provenance& p) {
    return "# config_hash: " + p.config_hash + "\n# window: " + p.window + "\n";
}

std::string format_probability_table(const std::vector<ProbabilitySeries>& series, const Provenance& p) {
    if (series.empty()) throw InvalidArgument("no probability series to format");
    const auto dates = series.front().timestamps();
    for (const auto& s : series) {
        if (!std::equal(dates.begin(), dates.end(), s.timestamps().begin(), s.timestamps().end())) {
            throw InvalidArgument("probability series '" + s.asset_id() + "' is not aligned with '" +
                                  series.front().asset_id() + "'");
        }
    }
    std::string out = provenance_header(p) + "date";
    for (const auto& s : series) out += "," + s.asset_id();
    out += "\n";
    for (std::size_t t = 0; t < dates.size(); ++t) {
        out += dates[t].iso();
        for (const auto& s : series) out += "," + format_double(s[t]);
        out += "\n";
    }
    return out;
}

std::vector<ProbabilitySeries> parse_probability_table(const std::string& text) {
    const auto lines = content_lines(text);
    if (lines.empty()) throw ParseError("probability table has no header", 0);
    const auto header = csv_fields(lines.front().second);
    if (header.size() < 2 || header[0] != "date") {
        throw ParseError("probability table header must start with 'date'", lines.front().first);
    }
    std::vector<Date> dates;
    std::vector<std::vector<double>> cols(header.size() - 1);
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [number, line] = lines[k];
        const auto fields = csv_fields(line);
        if (fields.size() != header.size()) throw ParseError("wrong number of fields", number);
        try {
            dates.push_back(Date::parse(fields[0]));
        } catch (const InvalidArgument& e) {
            throw ParseError(e.what(), number);
        }
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const auto v = parse_double(fields[c]);
            if (!v) throw ParseError("unparseable probability '" + fields[c] + "'", number);
            cols[c - 1].push_back(*v);
        }
    }
    std::vector<ProbabilitySeries> out;
    for (std::size_t c = 0; c < cols.size(); ++c) out.emplace_back(header[c + 1], dates, std::move(cols[c]));
    return out;
}

std::string format_sii_matrix(const te::SIIMatrix& m, const Provenance& p) {
    std::string out = provenance_header(p) + "from\\to";
    for (const auto& id : m.ids()) out += "," + id;
    out += "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += m.ids()[i];
        for (std::size_t j = 0; j < m.size(); ++j) out += "," + format_double(m.at(i, j));
        out += "\n";
    }
    return out;
}

te::SIIMatrix parse_sii_matrix(const std::string& text) {
    const auto lines = content_lines(text);
    if (lines.empty()) throw ParseError("SII matrix has no header", 0);
    const auto header = csv_fields(lines.front().second);
    std::vector<std::string> ids(header.begin() + 1, header.end());
    if (lines.size() != ids.size() + 1) {
        throw ParseError("SII matrix needs one row per column id", lines.back().first);
    }
    std::vector<double> values;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto& [number, line] = lines[k];
        const auto fields = csv_fields(line);
        if (fields.size() != header.size()) throw ParseError("wrong number of fields", number);
        if (fields[0] != ids[k - 1]) throw ParseError("row '" + fields[0] + "' out of order", number);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const auto v = parse_double(fields[c]);
            if (!v) throw ParseError("unparseable SII value '" + fields[c] + "'", number);
            values.push_back(*v);
        }
    }
    return te::SIIMatrix(std::move(ids), std::move(values), comment_value(text, "window").value_or(""));
}

std::string format_indicator_table(const network::IndicatorTable& t, const network::NodeGroup& groups,
                                   const Provenance& p) {
    std::string out = provenance_header(p) + "id,group";
    for (const auto& name : network::indicator_names()) out += "," + name;
    out += "\n";
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
        out += t.ids[i] + "," + network::to_string(groups.of(t.ids[i]));
        for (const auto& name : network::indicator_names()) {
            out += "," + format_double(network::indicator_value(t.rows[i], name));
        }
        out += "\n";
    }
    return out;
}

GraphFormat parse_graph_format(const std::string& token) {
    if (token == "dot") return GraphFormat::dot;
    if (token == "graph-json") return GraphFormat::graph_json;
    throw UsageError("unknown graph format '" + token + "', expected dot or graph-json");
}

namespace {

std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string format_dot(const network::SINGraph& g, const Provenance& p) {
    std::string out = "// config_hash: " + p.config_hash + "\n// window: " + p.window + "\n";
    out += "digraph SIN {\n";
    out += "  graph [threshold=" + format_double(g.threshold) + "];\n";
    for (const auto& n : g.nodes) {
        out += "  " + dot_quote(n.id) + " [group=" + network::to_string(n.group) +
               ", size_value=" + format_double(n.size_value);
        if (n.color_value) out += ", color_value=" + format_double(*n.color_value);
        out += "];\n";
    }
    for (const auto& e : g.edges) {
        // Pen width 1 at weight 0 up to 5 at weight 1.
        out += "  " + dot_quote(e.source) + " -> " + dot_quote(e.target) + " [weight=" + format_double(e.weight) +
               ", penwidth=" + format_double(1.0 + 4.0 * e.weight) + ", nsii=" + format_double(e.nsii) + "];\n";
    }
    out += "}\n";
    return out;
}

std::string format_json(const network::SINGraph& g, const Provenance& p) {
    ordered_json doc;
    doc["schema"] = kGraphSchema;
    doc["config_hash"] = p.config_hash;
    doc["window"] = p.window;
    doc["threshold"] = g.threshold;
    doc["nodes"] = ordered_json::array();
    for (const auto& n : g.nodes) {
        ordered_json node;
        node["id"] = n.id;
        node["group"] = network::to_string(n.group);
        node["size_value"] = n.size_value;
        node["color_value"] = n.color_value ? ordered_json(*n.color_value) : ordered_json(nullptr);
        doc["nodes"].push_back(std::move(node));
    }
    doc["edges"] = ordered_json::array();
    for (const auto& e : g.edges) {
        ordered_json edge;
        edge["source"] = e.source;
        edge["target"] = e.target;
        edge["weight"] = e.weight;
        edge["nsii"] = e.nsii;
        doc["edges"].push_back(std::move(edge));
    }
    return doc.dump(2) + "\n";
}

}  // namespace

std::string format_graph(const network::SINGraph& g, GraphFormat format, const Provenance& p) {
    return format == GraphFormat::dot ? format_dot(g, p) : format_json(g, p);
}

void export_graph(const network::SINGraph& g, GraphFormat format, const Provenance& p,
                  const std::filesystem::path& path) {
    write_text_file(path, format_graph(g, format, p));
}

ImportedGraph parse_graph_json(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("graph-JSON: ") + e.what(), 0);
    }
    try {
        if (doc.at("schema").get<std::string>() != kGraphSchema) {
            throw ParseError("graph-JSON: unsupported schema '" + doc.at("schema").get<std::string>() + "'", 0);
        }
        ImportedGraph out;
        out.provenance.config_hash = doc.at("config_hash").get<std::string>();
        out.provenance.window = doc.at("window").get<std::string>();
        out.graph.threshold = doc.at("threshold").get<double>();
        for (const auto& n : doc.at("nodes")) {
            network::Node node{n.at("id").get<std::string>(), network::parse_group(n.at("group").get<std::string>()),
                               n.at("size_value").get<double>(), std::nullopt};
            if (!n.at("color_value").is_null()) node.color_value = n.at("color_value").get<double>();
            out.graph.nodes.push_back(std::move(node));
        }
        for (const auto& e : doc.at("edges")) {
            out.graph.edges.push_back({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                                       e.at("weight").get<double>(), e.at("nsii").get<double>()});
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("graph-JSON: ") + e.what(), 0);
    }
}

}  // namespace bubblenet::io
