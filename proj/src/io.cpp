#include "dacglm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace dacglm {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& raw, double& out) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size()) return true;
    if (s == "NA" || s == "NaN" || s == "nan" || s == "NAN") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    return false;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Dataset load_csv(const fs::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' has no header row");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t c = 0; c < header.size(); ++c) pos.emplace(header[c], c);
    auto find_col = [&](const std::string& name) {
        auto it = pos.find(name);
        if (it == pos.end())
            throw DataError("'" + path.string() + "': missing column '" + name + "'");
        return it->second;
    };
    const std::size_t ycol = find_col(schema.response);

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
        if (rows.back().size() != header.size())
            throw DataError("'" + path.string() + "': row " + std::to_string(rows.size()) +
                            " has " + std::to_string(rows.back().size()) + " fields, expected " +
                            std::to_string(header.size()));
    }
    if (rows.empty()) throw DataError("'" + path.string() + "': empty dataset");

    std::vector<std::size_t> fcols;
    if (!schema.features.empty()) {
        for (const auto& f : schema.features) fcols.push_back(find_col(f));
    } else {
        // Columns whose first row is not numeric are treated as non-features.
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == ycol) continue;
            double probe = 0.0;
            const std::string cell = trim(rows.front()[c]);
            if (parse_double(cell, probe) || cell.empty()) fcols.push_back(c);
        }
    }

    Dataset d;
    const Index n = static_cast<Index>(rows.size());
    d.y.resize(n);
    d.X.resize(n, static_cast<Index>(fcols.size()));
    for (std::size_t c : fcols) d.column_names.push_back(header[c]);
    auto cell = [&](std::size_t r, std::size_t c) {
        double v = 0.0;
        if (!parse_double(rows[r][c], v))
            throw DataError("'" + path.string() + "': cannot parse '" + rows[r][c] +
                            "' at row " + std::to_string(r + 1) + ", column '" + header[c] + "'");
        if (!std::isfinite(v))
            throw DataError("'" + path.string() + "': non-finite value at row " +
                            std::to_string(r + 1) + ", column '" + header[c] + "'");
        return v;
    };
    for (std::size_t r = 0; r < rows.size(); ++r) {
        d.y(static_cast<Index>(r)) = cell(r, ycol);
        for (std::size_t k = 0; k < fcols.size(); ++k)
            d.X(static_cast<Index>(r), static_cast<Index>(k)) = cell(r, fcols[k]);
    }
    return d;
}

void write_csv(const fs::path& path, const Dataset& data, const std::string& response_name) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << response_name;
    for (Index j = 0; j < data.p(); ++j) out << ',' << data.column_name(j);
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index i = 0; i < data.n(); ++i) {
        out << data.y(i);
        for (Index j = 0; j < data.p(); ++j) out << ',' << data.X(i, j);
        out << '\n';
    }
}

std::string file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

fs::path ShardManifest::resolve(const ShardEntry& e) const {
    const fs::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
}

ShardManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    ShardManifest m;
    try {
        const json j = json::parse(in);
        m.schema.response = j.at("schema").at("response").get<std::string>();
        m.schema.features = j.at("schema").at("features").get<std::vector<std::string>>();
        for (const auto& s : j.at("shards")) {
            ShardEntry e;
            e.path = s.at("path").get<std::string>();
            e.rows = s.at("rows").get<long>();
            e.checksum = s.value("checksum", "");
            if (e.rows <= 0) throw DataError("shard '" + e.path + "' has non-positive row count");
            m.shards.push_back(e);
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest '" + path.string() + "': " + e.what());
    }
    if (m.shards.empty()) throw DataError("manifest '" + path.string() + "' lists no shards");
    m.base_dir = path.parent_path();
    return m;
}

void write_manifest(const fs::path& path, const ShardManifest& manifest) {
    json j;
    j["format"] = "dacglm.shard_manifest";
    j["version"] = 1;
    j["schema"] = {{"response", manifest.schema.response}, {"features", manifest.schema.features}};
    j["shards"] = json::array();
    for (const auto& s : manifest.shards)
        j["shards"].push_back({{"path", s.path}, {"rows", s.rows}, {"checksum", s.checksum}});
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

Dataset load_shard(const ShardManifest& manifest, std::size_t index) {
    const ShardEntry& e = manifest.shards.at(index);
    const fs::path p = manifest.resolve(e);
    if (!e.checksum.empty() && file_checksum(p) != e.checksum)
        throw DataError("shard " + std::to_string(index) + " ('" + p.string() +
                        "'): checksum mismatch");
    Dataset d = load_csv(p, manifest.schema);
    if (d.n() != e.rows)
        throw DataError("shard " + std::to_string(index) + " ('" + p.string() + "'): expected " +
                        std::to_string(e.rows) + " rows, found " + std::to_string(d.n()));
    return d;
}

json to_json(const BatchSummary& s) {
    json j;
    j["format"] = "dacglm.batch_summary";
    j["version"] = 1;
    j["batch_index"] = s.batch_index;
    j["p"] = s.p();
    j["n"] = s.n;
    j["phi_hat"] = s.phi_hat;
    j["lambda"] = s.lambda;
    j["ridge_tau"] = s.ridge_tau;
    j["kkt_violation"] = s.kkt_violation;
    j["converged"] = s.converged;
    j["column_names"] = s.column_names;
    j["active"] = s.active;
    j["beta_c"] = std::vector<double>(s.beta_c.data(), s.beta_c.data() + s.beta_c.size());
    std::vector<double> lower;
    lower.reserve(static_cast<std::size_t>(s.p() * (s.p() + 1) / 2));
    for (Index i = 0; i < s.p(); ++i)
        for (Index c = 0; c <= i; ++c) lower.push_back(s.precision(i, c));
    j["precision_lower"] = lower;
    return j;
}

BatchSummary batch_summary_from_json(const json& j) {
    BatchSummary s;
    try {
        if (j.at("format").get<std::string>() != "dacglm.batch_summary")
            throw DataError("not a batch summary record");
        const Index p = j.at("p").get<Index>();
        s.batch_index = j.value("batch_index", 0);
        s.n = j.at("n").get<long>();
        s.phi_hat = j.at("phi_hat").get<double>();
        s.lambda = j.at("lambda").get<double>();
        s.ridge_tau = j.at("ridge_tau").get<double>();
        s.kkt_violation = j.value("kkt_violation", 0.0);
        s.converged = j.value("converged", true);
        s.column_names = j.value("column_names", std::vector<std::string>{});
        s.active = j.value("active", std::vector<bool>{});
        const auto beta = j.at("beta_c").get<std::vector<double>>();
        const auto lower = j.at("precision_lower").get<std::vector<double>>();
        if (static_cast<Index>(beta.size()) != p ||
            static_cast<Index>(lower.size()) != p * (p + 1) / 2)
            throw DataError("array lengths do not match p = " + std::to_string(p));
        s.beta_c = Eigen::Map<const VectorXd>(beta.data(), p);
        s.precision.resize(p, p);
        std::size_t k = 0;
        for (Index i = 0; i < p; ++i)
            for (Index c = 0; c <= i; ++c) {
                s.precision(i, c) = lower[k];
                s.precision(c, i) = lower[k];
                ++k;
            }
        if (s.n < 1 || !(s.phi_hat > 0.0)) throw DataError("invalid n or phi_hat");
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed batch summary: ") + e.what());
    }
    return s;
}

BatchSummary read_batch_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return batch_summary_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw DataError("'" + path.string() + "': " + e.what());
    } catch (const DataError& e) {
        throw DataError("'" + path.string() + "': " + e.what());
    }
}

void write_batch_summary(const fs::path& path, const BatchSummary& s) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_json(s).dump() << '\n';
}

json to_json(const CombinedFit& fit, double level) {
    const auto rows = wald_inference(fit, level);
    json j;
    j["format"] = "dacglm.combined_fit";
    j["version"] = 1;
    j["combiner"] = std::string(to_string(fit.combiner));
    if (fit.combiner == Combiner::voting) j["omega"] = fit.omega;
    j["N"] = fit.N;
    j["K"] = fit.K;
    j["level"] = level;
    j["ridge_tau"] = fit.ridge_tau;
    json names = json::array(), beta = json::array(), se = json::array(), ci = json::array(),
         pv = json::array();
    for (const auto& r : rows) {
        names.push_back(r.name);
        beta.push_back(r.estimate);
        se.push_back(number_or_null(r.std_error));
        ci.push_back(json::array({number_or_null(r.ci_lo), number_or_null(r.ci_hi)}));
        pv.push_back(number_or_null(r.p_value));
    }
    j["names"] = names;
    j["beta"] = beta;
    j["se"] = se;
    j["ci"] = ci;
    j["p_value"] = pv;
    j["included_batches"] = fit.included_batches;
    j["diagnostics"] = fit.diagnostics;
    return j;
}

std::string coefficient_csv(const CombinedFit& fit, double level) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "name,estimate,se,ci_lo,ci_hi,p_value\n";
    auto put = [&](double v) {
        if (std::isfinite(v)) os << v;
        else os << "NA";
    };
    for (const auto& r : wald_inference(fit, level)) {
        os << r.name << ',';
        put(r.estimate);
        os << ',';
        put(r.std_error);
        os << ',';
        put(r.ci_lo);
        os << ',';
        put(r.ci_hi);
        os << ',';
        put(r.p_value);
        os << '\n';
    }
    return os.str();
}

}  // namespace dacglm
