#include "propcal/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "propcal/bootstrap.hpp"
#include "propcal/log.hpp"
#include "propcal/parallel.hpp"
#include "propcal/propagator_calibration.hpp"
#include "propcal/synthetic_market.hpp"

namespace propcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HelpRequest : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError(what + ": '" + s + "' is not a number");
    return v;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError(what + ": '" + s + "' is not a lag");
    return v;
}

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;
    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

std::string series_csv(const LagSeries& s, std::size_t first_lag = 0) {
    std::string out = "lag,value,count\n";
    for (std::size_t k = first_lag; k <= s.max_lag(); ++k)
        out += std::to_string(k) + ',' + num(s.values[k]) + ',' + std::to_string(s.counts[k]) + '\n';
    return out;
}

/// lag column followed by one column per named series (lags 0..L).
std::string columns_csv(const std::vector<std::string>& names, const std::vector<const std::vector<double>*>& cols,
                        std::size_t max_lag) {
    std::string out = "lag";
    for (const auto& n : names) out += ',' + n;
    out += '\n';
    for (std::size_t k = 0; k <= max_lag; ++k) {
        out += std::to_string(k);
        for (const auto* c : cols) out += ',' + (k < c->size() ? num((*c)[k]) : std::string());
        out += '\n';
    }
    return out;
}

std::string dump(const ordered_json& j) { return j.dump(2) + '\n'; }

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct Inputs {
    std::vector<SymbolTape> tapes;
    TagSet tags;
    std::size_t focal = 0;
    bool has_focal = false;
    ordered_json manifest_inputs = ordered_json::array();
    std::vector<std::int64_t> prints;  // raw prints per tape
};

Inputs load_inputs(const RunConfig& cfg) {
    Inputs in;
    std::vector<RawPrint> prints;
    for (const auto& path : cfg.inputs) {
        const std::string data = read_file(path);
        in.manifest_inputs.push_back({{"path", path}, {"bytes", data.size()}, {"fnv1a64", hex64(fnv1a64(data))}});
        std::istringstream is(data);
        std::vector<RawPrint> part;
        try {
            part = parse_tape(is, cfg.format);
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": " + e.what());
        }
        prints.insert(prints.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    for (auto& [symbol, sp] : split_by_symbol(std::move(prints))) {
        in.prints.push_back(static_cast<std::int64_t>(sp.size()));
        in.tapes.push_back(build_symbol_tape(aggregate_prints(sp), symbol));
    }
    if (in.tapes.empty()) throw ValidationError("inputs contain no trades");

    if (cfg.tags.empty()) {
        std::set<std::string> found;
        for (const auto& t : in.tapes)
            for (std::size_t c = 0; c < t.flow().tag_names.size(); ++c)
                if (t.tag_counts()[c] > 0) found.insert(t.flow().tag_names[c]);
        in.tags = TagSet(std::vector<std::string>(found.begin(), found.end()));
    } else {
        in.tags = TagSet(cfg.tags);
    }
    for (const auto& t : in.tapes) t.flow().code_map(in.tags);
    if (!cfg.focal_tag.empty()) {
        in.focal = in.tags.index(cfg.focal_tag);
        in.has_focal = true;
    }
    return in;
}

struct Pipeline {
    const RunConfig& cfg;
    Inputs in;
    std::vector<FlowStatistics> per_symbol;
    FlowStatistics pooled;

    void statistics(std::size_t lag) {
        per_symbol.resize(in.tapes.size());
        StatisticsOptions opt;
        opt.normalization = cfg.normalization;
        const bool many = in.tapes.size() > 1;
        opt.workers = many ? 1 : cfg.workers;
        parallel_for(in.tapes.size(), many ? cfg.workers : 1,
                     [&](std::size_t i) { per_symbol[i] = compute_flow_statistics(in.tapes[i], in.tags, lag, opt); });
        pooled = pool_statistics(std::span<const FlowStatistics>(per_symbol), cfg.pool);
        for (std::size_t a = 0; a < in.tags.size(); ++a)
            if (pooled.probabilities.counts[a] == 0)
                throw ValidationError("tag '" + in.tags.name(a) + "' has no trades in the inputs");
    }
};

std::string pair_name(const TagSet& tags, std::size_t a, std::size_t b) { return tags.name(a) + "__" + tags.name(b); }

void emit_statistics(const Pipeline& p, Artifacts& art, const LagSeries* reconstructed) {
    const auto& s = p.pooled;
    const TagSet& tags = s.tags();
    for (std::size_t a = 0; a < tags.size(); ++a) art.add("response_" + tags.name(a) + ".csv", series_csv(s.responses[a]));
    for (std::size_t a = 0; a < tags.size(); ++a)
        for (std::size_t b = 0; b < tags.size(); ++b)
            art.add("correlation_" + pair_name(tags, a, b) + ".csv", series_csv(s.correlations.at(a, b)));

    ordered_json j;
    j["symbols"] = s.symbols;
    j["max_lag"] = s.max_lag;
    j["normalization"] = to_string(s.normalization);
    j["pool"] = to_string(p.cfg.pool);
    j["tags"] = ordered_json::array();
    for (std::size_t a = 0; a < tags.size(); ++a)
        j["tags"].push_back({{"name", tags.name(a)}, {"probability", s.probabilities.p[a]}, {"trades", s.probabilities.counts[a]}});
    ordered_json per = ordered_json::array();
    for (std::size_t i = 0; i < p.per_symbol.size(); ++i) {
        ordered_json e;
        e["symbol"] = p.in.tapes[i].symbol();
        e["trades"] = p.in.tapes[i].size();
        e["sessions"] = p.in.tapes[i].session_count();
        e["probabilities"] = p.per_symbol[i].probabilities.p;
        per.push_back(e);
    }
    j["per_symbol"] = per;
    art.add("stats.json", dump(j));

    std::vector<std::string> names;
    std::vector<const std::vector<double>*> cols;
    for (std::size_t a = 0; a < tags.size(); ++a) {
        names.push_back("R_" + tags.name(a));
        cols.push_back(&s.responses[a].values);
    }
    if (reconstructed) {
        names.push_back("R_reconstructed_" + tags.name(p.in.focal));
        cols.push_back(&reconstructed->values);
    }
    art.add("fig1_response.csv", columns_csv(names, cols, s.max_lag));
    names.clear();
    cols.clear();
    for (std::size_t a = 0; a < tags.size(); ++a)
        for (std::size_t b = 0; b < tags.size(); ++b) {
            names.push_back("C_" + pair_name(tags, a, b));
            cols.push_back(&s.correlations.at(a, b).values);
        }
    art.add("fig2_correlations.csv", columns_csv(names, cols, s.max_lag));
}

struct Reconstruction {
    LagSeries base, fitted;
    double slope = 0.0;
    LagWindow window;
    std::string source;
};

std::optional<Reconstruction> reconstruct(const Pipeline& p, const PropagatorSet& G) {
    if (!p.in.has_focal || p.in.tags.size() != 2) return std::nullopt;
    const std::size_t f = p.in.focal, m = 1 - f;
    const TagSet& tags = p.in.tags;
    Reconstruction r;
    r.source = tags.name(m);
    const auto shared = with_shared_propagator(G, tags.name(m), tags.name(f));
    r.base = reconstruct_response(shared, p.pooled.correlations, p.pooled.probabilities, tags.name(f), 0.0);
    r.window = p.cfg.fit_window.value_or(default_slope_window(G.max_lag));
    if (r.window.last > G.max_lag) throw ValidationError("fit window exceeds the max lag");
    const LagSeries observed = p.pooled.responses[f].truncated(G.max_lag);
    r.slope = fit_information_slope(observed, r.base, r.window);
    r.fitted = reconstruct_response(shared, p.pooled.correlations, p.pooled.probabilities, tags.name(f), r.slope);
    return r;
}

void emit_propagators(const Pipeline& p, const PropagatorSet& G, const std::optional<Reconstruction>& rec,
                      Artifacts& art) {
    const TagSet& tags = G.tags;
    for (std::size_t a = 0; a < tags.size(); ++a) {
        std::string out = "lag,G,residual\n";
        for (std::size_t k = 0; k <= G.max_lag; ++k)
            out += std::to_string(k) + ',' + num(G.propagators[a].values[k]) + ',' + num(G.residuals[a][k]) + '\n';
        art.add("propagator_" + tags.name(a) + ".csv", out);
    }
    ordered_json j;
    j["tags"] = tags.names();
    j["max_lag"] = G.max_lag;
    j["ridge"] = G.ridge;
    j["residual_norm"] = G.residual_norm;
    j["condition_estimate"] = G.condition_estimate;
    j["boundary_affected_from_lag"] = G.tail_start;
    j["normalization"] = to_string(p.pooled.normalization);
    if (rec) {
        ordered_json r;
        r["focal_tag"] = tags.name(p.in.focal);
        r["shared_propagator_from"] = rec->source;
        r["slope"] = rec->slope;
        r["fit_window"] = {rec->window.first, rec->window.last};
        j["reconstruction"] = r;
        const auto& measured = p.pooled.responses[p.in.focal];
        std::string out = "lag,measured,reconstructed,reconstructed_no_drift\n";
        for (std::size_t k = 0; k <= G.max_lag; ++k)
            out += std::to_string(k) + ',' + num(measured.values[k]) + ',' + num(rec->fitted.values[k]) + ',' +
                   num(rec->base.values[k]) + '\n';
        art.add("reconstructed_" + tags.name(p.in.focal) + ".csv", out);
    }
    art.add("propagators.json", dump(j));
    std::vector<std::string> names;
    std::vector<const std::vector<double>*> cols;
    for (std::size_t a = 0; a < tags.size(); ++a) {
        names.push_back("G_" + tags.name(a));
        cols.push_back(&G.propagators[a].values);
    }
    art.add("fig3_propagators.csv", columns_csv(names, cols, G.max_lag));
}

void emit_kernels(const FlowKernelSet& K, Artifacts& art) {
    const TagSet& tags = K.tags;
    ordered_json j;
    j["tags"] = tags.names();
    j["max_lag"] = K.max_lag;
    j["ridge"] = K.ridge;
    j["residual_norm"] = K.residual_norm;
    j["condition_estimate"] = K.condition_estimate;
    j["sample_count"] = K.sample_count;
    j["noise_variance"] = ordered_json::object();
    for (std::size_t a = 0; a < tags.size(); ++a) j["noise_variance"][tags.name(a)] = K.noise_variance[a];
    j["negligible"] = ordered_json::array();
    std::vector<std::string> names;
    std::vector<const std::vector<double>*> cols;
    for (std::size_t a = 0; a < tags.size(); ++a)
        for (std::size_t b = 0; b < tags.size(); ++b) {
            const auto& k = K.at(a, b);
            const auto& se = K.std_error(a, b);
            std::string out = "lag,K,std_error\n";
            for (std::size_t l = 1; l <= K.max_lag; ++l)
                out += std::to_string(l) + ',' + num(k.values[l]) + ',' + num(se[l]) + '\n';
            art.add("kernel_" + pair_name(tags, a, b) + ".csv", out);
            if (kernel_negligible(K, a, b)) j["negligible"].push_back(pair_name(tags, a, b));
            names.push_back("K_" + pair_name(tags, a, b));
            cols.push_back(&k.values);
        }
    art.add("kernels.json", dump(j));
    art.add("fig4_kernels.csv", columns_csv(names, cols, K.max_lag));
}

void emit_dressed(const Pipeline& p, const PropagatorSet& G, const FlowKernelSet& K, Artifacts& art) {
    if (G.tags.size() != 2) throw ValidationError("dressed impact needs exactly two tags");
    if (!p.in.has_focal) throw UsageError("dressed impact needs --focal-tag");
    const std::size_t f = p.in.focal, m = 1 - f;
    const TagSet& tags = G.tags;
    std::vector<DressedPropagator> d;
    if (p.cfg.dressing == DressingPath::full) {
        d = dressed_propagator_full(G, K, tags.name(f), p.cfg.herding_scale);
    } else {
        DressingKernels dk;
        dk.focal_to_other = K.at(f, m);
        dk.other_to_focal = LagSeries(K.max_lag);
        dk.other_to_other = LagSeries(K.max_lag);
        for (std::size_t u = 1; u <= K.max_lag; ++u)
            dk.other_to_other.values[u] = p.cfg.herding_scale * dk.focal_to_other.values[u];
        auto gm = dressed_propagator_simplified(G.propagators[m], K.at(f, m), p.cfg.herding_scale);
        auto [gf, unused] = dress_coupled(G.propagators[f], G.propagators[m], dk);
        d.resize(2);
        d[f] = {tags.name(f), std::move(gf), DressingPath::simplified, p.cfg.herding_scale, true};
        d[m] = std::move(gm);
        d[m].tag = tags.name(m);
    }
    ordered_json j;
    j["focal_tag"] = tags.name(f);
    j["path"] = to_string(p.cfg.dressing);
    j["herding_scale"] = p.cfg.herding_scale;
    j["focal_reaction_neglected"] = d[f].focal_reaction_neglected;
    j["max_lag"] = G.max_lag;
    j["kernel_lag"] = K.max_lag;
    art.add("dressed.json", dump(j));
    for (std::size_t a = 0; a < 2; ++a) {
        std::string out = "lag,G_star\n";
        for (std::size_t k = 0; k <= G.max_lag; ++k) out += std::to_string(k) + ',' + num(d[a].values.values[k]) + '\n';
        art.add("dressed_" + tags.name(a) + ".csv", out);
    }
    art.add("fig5_dressed.csv",
            columns_csv({"G_" + tags.name(m), "G_" + tags.name(f), "G_star_" + tags.name(m), "G_star_" + tags.name(f)},
                        {&G.propagators[m].values, &G.propagators[f].values, &d[m].values.values, &d[f].values.values},
                        G.max_lag));
}

void emit_bootstrap(Pipeline& p, Artifacts& art) {
    const std::size_t L = p.cfg.max_lag, T = p.in.tags.size();
    BootstrapPipeline fn = [&](std::span<const std::size_t> idx) {
        std::vector<const FlowStatistics*> sel;
        for (auto i : idx) sel.push_back(&p.per_symbol[i]);
        const auto pooled = pool_statistics(std::span<const FlowStatistics* const>(sel), p.cfg.pool);
        const auto G = solve_propagators(assemble_system(pooled, L), p.cfg.ridge);
        std::vector<double> v;
        for (std::size_t a = 0; a < T; ++a)
            v.insert(v.end(), G.propagators[a].values.begin() + 1, G.propagators[a].values.end());
        return v;
    };
    BootstrapOptions opt;
    opt.replicas = p.cfg.replicas;
    opt.quantiles = p.cfg.quantiles;
    opt.seed = p.cfg.seed.value_or(0);
    opt.workers = p.cfg.workers;
    const auto bands = bootstrap_bands(p.in.tapes.size(), fn, opt);
    for (std::size_t a = 0; a < T; ++a) {
        std::string out = "lag,point,lower,upper\n";
        for (std::size_t k = 1; k <= L; ++k) {
            const std::size_t i = a * L + k - 1;
            out += std::to_string(k) + ',' + num(bands.point[i]) + ',' + num(bands.lower[i]) + ',' + num(bands.upper[i]) +
                   '\n';
        }
        art.add("bootstrap_G_" + p.in.tags.name(a) + ".csv", out);
    }
    ordered_json j;
    j["statistic"] = "propagator";
    j["tags"] = p.in.tags.names();
    j["max_lag"] = L;
    j["symbols"] = p.pooled.symbols;
    j["replicas"] = bands.replicas;
    j["quantiles"] = {bands.quantiles.first, bands.quantiles.second};
    j["seed"] = bands.seed;
    art.add("bootstrap.json", dump(j));
}

void emit_simulation(const RunConfig& cfg, Artifacts& art, ordered_json& manifest_inputs) {
    const std::string text = read_file(cfg.synth_config);
    manifest_inputs.push_back({{"path", cfg.synth_config}, {"bytes", text.size()}, {"fnv1a64", hex64(fnv1a64(text))}});
    SynthConfig base = parse_synth_config(text);
    if (cfg.seed) base.seed = *cfg.seed;
    const std::string ext = cfg.format == TapeFormat::csv ? ".csv" : ".bin";

    std::vector<SynthConfig> configs(cfg.symbols, base);
    std::vector<std::string> tapes(cfg.symbols);
    std::vector<SyntheticFlow> flows(cfg.symbols);
    for (std::size_t k = 0; k < cfg.symbols; ++k) {
        if (cfg.symbols > 1) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%03zu", k);
            configs[k].symbol = base.symbol + buf;
            configs[k].seed = base.seed + k;
        }
    }
    parallel_for(cfg.symbols, cfg.workers, [&](std::size_t k) {
        flows[k] = generate_flow(configs[k]);
        const auto tape = generate_prices(flows[k].flow, configs[k]);
        std::ostringstream os;
        write_tape(os, tape, cfg.format);
        tapes[k] = os.str();
    });
    ordered_json j;
    j["config"] = ordered_json::parse(synth_config_json(base));
    j["symbols"] = ordered_json::array();
    for (std::size_t k = 0; k < cfg.symbols; ++k) {
        const std::string name = "tape_" + configs[k].symbol + ext;
        j["symbols"].push_back({{"symbol", configs[k].symbol},
                                {"seed", configs[k].seed},
                                {"file", name},
                                {"trades", configs[k].length},
                                {"sessions", configs[k].sessions},
                                {"clipped_fraction", flows[k].clipped_fraction},
                                {"p_min", flows[k].p_min}});
        art.add(name, std::move(tapes[k]));
    }
    art.add("simulation.json", dump(j));
}

void emit_ingest(const RunConfig& cfg, const Inputs& in, Artifacts& art) {
    const std::string ext = cfg.format == TapeFormat::csv ? ".csv" : ".bin";
    ordered_json j;
    j["tags"] = in.tags.names();
    j["symbols"] = ordered_json::array();
    for (std::size_t i = 0; i < in.tapes.size(); ++i) {
        const auto& t = in.tapes[i];
        ordered_json counts = ordered_json::object();
        for (std::size_t c = 0; c < t.flow().tag_names.size(); ++c) counts[t.flow().tag_names[c]] = t.tag_counts()[c];
        std::ostringstream os;
        write_tape(os, t, cfg.format);
        const std::string name = "tape_" + t.symbol() + ext;
        j["symbols"].push_back({{"symbol", t.symbol()},
                                {"prints", in.prints[i]},
                                {"trades", t.size()},
                                {"sessions", t.session_count()},
                                {"longest_session", t.flow().longest_session()},
                                {"tag_counts", counts},
                                {"file", name}});
        art.add(name, os.str());
    }
    art.add("ingest.json", dump(j));
}

ordered_json config_json(const RunConfig& c) {
    ordered_json j;
    j["subcommand"] = c.subcommand;
    j["inputs"] = c.inputs;
    j["format"] = c.format == TapeFormat::csv ? "csv" : "bin";
    j["tags"] = c.tags;
    j["focal_tag"] = c.focal_tag;
    j["max_lag"] = c.max_lag;
    j["kernel_lag"] = c.kernel_lag;
    j["normalization"] = to_string(c.normalization);
    j["pool"] = to_string(c.pool);
    j["ridge"] = c.ridge;
    j["herding_scale"] = c.herding_scale;
    j["dressing"] = to_string(c.dressing);
    j["replicas"] = c.replicas;
    j["quantiles"] = {c.quantiles.first, c.quantiles.second};
    j["seed"] = c.seed ? ordered_json(*c.seed) : ordered_json(nullptr);
    j["workers"] = c.workers;
    j["out"] = c.out;
    j["fit_window"] = c.fit_window ? ordered_json{c.fit_window->first, c.fit_window->last} : ordered_json(nullptr);
    j["config"] = c.synth_config;
    j["symbols"] = c.symbols;
    return j;
}

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot create '" + tmp.string() + "'");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.flush();
        if (!os) throw IoError("write failure on '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

void report(std::ostream& err, const std::string& kind, int code, const std::string& message) {
    ordered_json j;
    j["error"] = {{"kind", kind}, {"exit_code", code}, {"message", message}};
    err << j.dump() << std::endl;
}

}  // namespace

RunConfig parse_run_config(const std::vector<std::string>& args) {
    RunConfig c;
    std::string format = "csv", normalization = "session-scaled", pool = "equal", quantiles = "0.16,0.84",
                dressing = "full", fit_window;
    std::uint64_t seed = 0;

    CLI::App app{"Trade-tape impact calibration", "propcal"};
    app.require_subcommand(1, 1);
    const std::vector<std::pair<const char*, const char*>> subs = {
        {"ingest", "parse, aggregate and validate tapes"},
        {"stats", "pooled responses and sign correlations"},
        {"calibrate", "propagators from pooled statistics"},
        {"kernels", "flow-reaction kernels from pooled correlations"},
        {"dressed", "dressed single-trade impact"},
        {"bootstrap", "propagator bands by resampling symbols"},
        {"simulate", "synthetic tapes from a ground-truth config"},
        {"pipeline", "stats, calibrate, kernels and dressed in one run"},
    };
    CLI::Option* seed_opt = nullptr;
    std::vector<CLI::Option*> seed_opts;
    for (const auto& [name, desc] : subs) {
        auto* sc = app.add_subcommand(name, desc);
        sc->add_option("--input", c.inputs, "tape files")->expected(1, -1);
        sc->add_option("--format", format, "tape format: csv or bin");
        sc->add_option("--tags", c.tags, "tag set (comma separated); default: every tag in the inputs")->delimiter(',');
        sc->add_option("--focal-tag", c.focal_tag, "focal actor tag");
        sc->add_option("--max-lag", c.max_lag, "propagator lag L");
        sc->add_option("--kernel-lag", c.kernel_lag, "flow-kernel lag L_K");
        sc->add_option("--normalization", normalization, "raw or session-scaled");
        sc->add_option("--pool", pool, "equal or count");
        sc->add_option("--ridge", c.ridge, "ridge weight (0: exact solve)");
        sc->add_option("--herding-scale", c.herding_scale, "scale of the market self-reaction kernel");
        sc->add_option("--dressing", dressing, "full or simplified");
        sc->add_option("--replicas", c.replicas, "bootstrap replicas");
        sc->add_option("--quantiles", quantiles, "bootstrap quantile pair, e.g. 0.16,0.84");
        seed_opts.push_back(sc->add_option("--seed", seed, "random seed"));
        sc->add_option("--workers", c.workers, "worker threads");
        sc->add_option("--out", c.out, "output directory");
        sc->add_option("--fit-window", fit_window, "information-slope fit window first:last");
        sc->add_option("--config", c.synth_config, "synthetic market config (simulate)");
        sc->add_option("--symbols", c.symbols, "number of synthetic symbols (simulate)");
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        for (auto* sc : app.get_subcommands({})) if (sc->parsed()) throw HelpRequest(sc->help());
        throw HelpRequest(app.help());
    }
    for (auto* sc : app.get_subcommands()) c.subcommand = sc->get_name();
    for (auto* o : seed_opts)
        if (o->count() > 0) seed_opt = o;
    if (seed_opt) c.seed = seed;

    try {
        c.format = parse_tape_format(format);
        c.normalization = parse_normalization(normalization);
        c.pool = parse_pool_mode(pool);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    if (dressing == "full")
        c.dressing = DressingPath::full;
    else if (dressing == "simplified")
        c.dressing = DressingPath::simplified;
    else
        throw UsageError("--dressing: expected full or simplified");
    const auto q = split(quantiles, ',');
    if (q.size() != 2) throw UsageError("--quantiles: expected two comma-separated levels");
    c.quantiles = {parse_double(q[0], "--quantiles"), parse_double(q[1], "--quantiles")};
    if (!fit_window.empty()) {
        const auto w = split(fit_window, ':');
        if (w.size() != 2) throw UsageError("--fit-window: expected first:last");
        c.fit_window = LagWindow{parse_size(w[0], "--fit-window"), parse_size(w[1], "--fit-window")};
    }
    return c;
}

void validate(const RunConfig& c) {
    const bool needs_inputs = c.subcommand != "simulate";
    if (needs_inputs && c.inputs.empty()) throw UsageError(c.subcommand + ": --input is required");
    if (c.subcommand == "simulate" && c.synth_config.empty()) throw UsageError("simulate: --config is required");
    if (c.max_lag < 1) throw UsageError("--max-lag must be at least 1");
    if (c.kernel_lag < 1) throw UsageError("--kernel-lag must be at least 1");
    if (!(c.ridge >= 0.0) || !std::isfinite(c.ridge)) throw UsageError("--ridge must be finite and >= 0");
    if (!(c.herding_scale >= 0.0) || !std::isfinite(c.herding_scale))
        throw UsageError("--herding-scale must be finite and >= 0");
    if (c.replicas < 1) throw UsageError("--replicas must be positive");
    const auto [lo, hi] = c.quantiles;
    if (!(lo > 0.0 && lo < 1.0 && hi > 0.0 && hi < 1.0) || lo > hi)
        throw UsageError("--quantiles must be an ordered pair inside (0, 1)");
    if (c.workers < 1) throw UsageError("--workers must be at least 1");
    if (c.symbols < 1) throw UsageError("--symbols must be at least 1");
    if (c.fit_window) {
        if (c.fit_window->empty() || c.fit_window->first < 1) throw UsageError("--fit-window must satisfy 1 <= first <= last");
        if (c.fit_window->last > c.max_lag) throw UsageError("--fit-window exceeds --max-lag");
    }
    std::set<std::string> seen;
    for (const auto& t : c.tags)
        if (t.empty() || !seen.insert(t).second) throw UsageError("--tags must be distinct non-empty names");
    if (!c.focal_tag.empty() && !c.tags.empty() && !seen.count(c.focal_tag))
        throw UsageError("--focal-tag '" + c.focal_tag + "' is not in --tags");
    if ((c.subcommand == "dressed" || c.subcommand == "pipeline") && c.focal_tag.empty())
        throw UsageError(c.subcommand + ": --focal-tag is required");
    if ((c.subcommand == "dressed" || c.subcommand == "pipeline") && !c.tags.empty() && c.tags.size() != 2)
        throw UsageError(c.subcommand + ": dressed impact needs exactly two tags");
    for (const auto& in : c.inputs)
        if (!fs::is_regular_file(in)) throw IoError("input '" + in + "' does not exist or is not a file");
    if (!c.synth_config.empty() && c.subcommand == "simulate" && !fs::is_regular_file(c.synth_config))
        throw IoError("config '" + c.synth_config + "' does not exist or is not a file");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> notices;
    set_notice_sink([&](const std::string& m) {
        notices.push_back(m);
        err << "propcal: " << m << '\n';
    });
    struct SinkReset {
        ~SinkReset() { set_notice_sink(nullptr); }
    } sink_reset;

    RunConfig cfg;
    try {
        cfg = parse_run_config(args);
        validate(cfg);
    } catch (const HelpRequest& h) {
        out << h.what();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << e.what() << '\n';
            return exit_ok;
        }
        report(err, "usage", exit_usage, e.what());
        return exit_usage;
    } catch (const UsageError& e) {
        report(err, "usage", exit_usage, e.what());
        return exit_usage;
    } catch (const IoError& e) {
        report(err, "io", exit_io, e.what());
        return exit_io;
    }

    Artifacts art;
    ordered_json inputs = ordered_json::array();
    double load_s = 0.0, compute_s = 0.0, write_s = 0.0;
    auto seconds_since = [](std::chrono::steady_clock::time_point a) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    };
    try {
        const std::string& sc = cfg.subcommand;
        if (sc == "simulate") {
            const auto tc = std::chrono::steady_clock::now();
            emit_simulation(cfg, art, inputs);
            compute_s = seconds_since(tc);
        } else {
            const auto tl = std::chrono::steady_clock::now();
            Pipeline p{cfg, load_inputs(cfg), {}, {}};
            inputs = p.in.manifest_inputs;
            load_s = seconds_since(tl);
            const auto tc = std::chrono::steady_clock::now();
            if ((sc == "dressed" || sc == "pipeline") && p.in.tags.size() != 2)
                throw ValidationError(sc + ": dressed impact needs exactly two tags, found " +
                                      std::to_string(p.in.tags.size()));
            if (sc == "ingest") {
                emit_ingest(cfg, p.in, art);
            } else {
                std::size_t lag = cfg.max_lag;
                if (sc == "kernels") lag = cfg.kernel_lag;
                if (sc == "dressed" || sc == "pipeline") lag = std::max(cfg.max_lag, cfg.kernel_lag);
                p.statistics(lag);
                std::optional<PropagatorSet> G;
                std::optional<Reconstruction> rec;
                if (sc == "calibrate" || sc == "dressed" || sc == "pipeline") {
                    G = solve_propagators(assemble_system(p.pooled, cfg.max_lag), cfg.ridge);
                    rec = reconstruct(p, *G);
                }
                if (sc == "stats" || sc == "pipeline") emit_statistics(p, art, rec ? &rec->fitted : nullptr);
                if (sc == "calibrate" || sc == "pipeline") emit_propagators(p, *G, rec, art);
                if (sc == "kernels" || sc == "dressed" || sc == "pipeline") {
                    const auto K = solve_flow_kernels(p.pooled.correlations, p.pooled.probabilities, cfg.kernel_lag,
                                                      cfg.ridge);
                    if (sc != "dressed") emit_kernels(K, art);
                    if (sc != "kernels") emit_dressed(p, *G, K, art);
                }
                if (sc == "bootstrap") emit_bootstrap(p, art);
            }
            compute_s = seconds_since(tc);
        }

        const auto tw = std::chrono::steady_clock::now();
        const fs::path dir(cfg.out);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory '" + cfg.out + "': " + ec.message());
        ordered_json files = ordered_json::array();
        for (const auto& [name, content] : art.files) {
            write_atomic(dir / name, content);
            files.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a64(content))}});
        }
        write_s = seconds_since(tw);

        ordered_json manifest;
        manifest["tool"] = "propcal";
        manifest["version"] = kVersion;
        manifest["command"] = cfg.subcommand;
        manifest["argv"] = args;
        manifest["config"] = config_json(cfg);
        manifest["inputs"] = inputs;
        manifest["artifacts"] = files;
        manifest["notices"] = notices;
        const std::time_t tt = std::chrono::system_clock::to_time_t(started);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
        manifest["started_at"] = stamp;
        manifest["timings"] = {{"load_s", load_s}, {"compute_s", compute_s}, {"write_s", write_s},
                               {"total_s", seconds_since(t0)}};
        write_atomic(dir / "manifest.json", dump(manifest));
        out << "wrote " << art.files.size() << " artifacts to " << cfg.out << '\n';
        return exit_ok;
    } catch (const UsageError& e) {
        report(err, "usage", exit_usage, e.what());
        return exit_usage;
    } catch (const IoError& e) {
        report(err, "io", exit_io, e.what());
        return exit_io;
    } catch (const NumericalError& e) {
        report(err, "computation", exit_computation, e.what());
        return exit_computation;
    } catch (const ValidationError& e) {
        report(err, "validation", exit_validation, e.what());
        return exit_validation;
    } catch (const std::exception& e) {
        report(err, "computation", exit_computation, e.what());
        return exit_computation;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace propcal::cli
