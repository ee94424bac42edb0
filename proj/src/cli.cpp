#include "odam/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "odam/embednet.hpp"
#include "odam/textio.hpp"

namespace odam {

namespace fs = std::filesystem;

namespace {

struct KeyDef {
    const char* name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    throw UsageError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + expected);
}

double real_value(std::string_view key, std::string_view v) {
    const auto x = parse_real(v);
    if (!x || !std::isfinite(*x)) bad_value(key, v, "a finite number");
    return *x;
}

std::size_t count_value(std::string_view key, std::string_view v) {
    const auto x = parse_int(v);
    if (!x || *x < 0) bad_value(key, v, "a non-negative integer");
    return static_cast<std::size_t>(*x);
}

bool bool_value(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true/false");
}

std::string join_reals(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
    return s;
}

template <class T>
std::string join_counts(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

#define ODAM_REAL(key, field) \
    KeyDef{key, [](const RunConfig& c) { return format_real(c.field); }, \
           [](RunConfig& c, std::string_view v) { c.field = real_value(key, v); }}
#define ODAM_COUNT(key, field) \
    KeyDef{key, [](const RunConfig& c) { return std::to_string(c.field); }, \
           [](RunConfig& c, std::string_view v) { c.field = count_value(key, v); }}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table{
        KeyDef{"seed", [](const RunConfig& c) { return std::to_string(c.seed()); },
               [](RunConfig& c, std::string_view v) { c.set_seed(count_value("seed", v)); }},
        ODAM_COUNT("identities", toy.identities),
        ODAM_COUNT("per_identity", toy.per_identity),
        ODAM_COUNT("dim", toy.dim),
        ODAM_REAL("center_radius", toy.center_radius),
        ODAM_REAL("cluster_spread", toy.cluster_spread),
        ODAM_REAL("center_jitter", toy.center_jitter),
        ODAM_REAL("layout_offset", toy.layout_offset),
        KeyDef{"translation", [](const RunConfig& c) { return join_reals(c.toy.translation); },
               [](RunConfig& c, std::string_view v) {
                   c.toy.translation.clear();
                   for (const auto& item : split_list(v)) c.toy.translation.push_back(real_value("translation", item));
               }},
        ODAM_REAL("rotation_deg", toy.rotation_deg),
        ODAM_REAL("outlier_ratio", toy.outlier_ratio),
        ODAM_REAL("outlier_inner", toy.outlier_inner),
        ODAM_REAL("outlier_outer", toy.outlier_outer),
        ODAM_REAL("outlier_axis_deg", toy.outlier_axis_deg),
        ODAM_REAL("outlier_arc_deg", toy.outlier_arc_deg),
        KeyDef{"mode", [](const RunConfig& c) { return std::string(mode_name(c.train.mode)); },
               [](RunConfig& c, std::string_view v) {
                   const auto m = parse_mode(v);
                   if (!m) bad_value("mode", v, "siamese, siamese-da, siamese-da-out or da-outlier-detection");
                   c.train.mode = *m;
               }},
        ODAM_REAL("margin", train.margin),
        ODAM_REAL("gamma", train.gamma),
        ODAM_REAL("eta", train.eta),
        ODAM_REAL("learning_rate", train.learning_rate),
        ODAM_COUNT("epochs", train.epochs),
        ODAM_COUNT("pairs_per_batch", train.pairs_per_batch),
        ODAM_COUNT("refs_per_class", train.refs_per_class),
        KeyDef{"span_exponent", [](const RunConfig& c) { return std::to_string(c.train.span_exponent); },
               [](RunConfig& c, std::string_view v) {
                   c.train.span_exponent = static_cast<int>(count_value("span_exponent", v));
               }},
        ODAM_REAL("bandwidth_factor", train.bandwidth_factor),
        KeyDef{"layer_dims", [](const RunConfig& c) { return join_counts(c.train.layer_dims); },
               [](RunConfig& c, std::string_view v) {
                   c.train.layer_dims.clear();
                   for (const auto& item : split_list(v)) c.train.layer_dims.push_back(count_value("layer_dims", item));
               }},
        ODAM_COUNT("adapt_layers", train.adapt_layers),
        KeyDef{"normalize_similarity",
               [](const RunConfig& c) { return std::string(c.train.normalize_similarity ? "true" : "false"); },
               [](RunConfig& c, std::string_view v) {
                   c.train.normalize_similarity = bool_value("normalize_similarity", v);
               }},
        ODAM_REAL("similarity_scale", train.similarity_scale),
        ODAM_REAL("stop_tolerance", train.stop_tolerance),
        ODAM_COUNT("patience", train.patience),
        ODAM_REAL("inlier_threshold", inlier_threshold),
        KeyDef{"directions",
               [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.directions.size(); ++i) s += (i ? "," : "") + c.directions[i];
                   return s;
               },
               [](RunConfig& c, std::string_view v) { c.directions = parse_directions(v); }},
    };
    return table;
}

#undef ODAM_REAL
#undef ODAM_COUNT

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct SplitData {
    Samples source;
    Samples target;
};

SplitData load_pair(const fs::path& source_path, const fs::path& target_path) {
    SplitData d{read_dataset(source_path), read_dataset(target_path)};
    if (d.source.empty()) throw std::runtime_error(source_path.string() + ": no samples");
    if (d.target.empty()) throw std::runtime_error(target_path.string() + ": no samples");
    return d;
}

std::vector<int> identities(const Samples& s) {
    std::vector<int> ids;
    ids.reserve(s.size());
    for (const auto& x : s) ids.push_back(x.identity);
    return ids;
}

std::vector<bool> truth_inliers(const Samples& s) {
    std::vector<bool> v;
    v.reserve(s.size());
    for (const auto& x : s) v.push_back(x.inlier);
    return v;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
    toy.seed = s;
    train.seed = s;
}

void RunConfig::validate() const {
    toy.validate();
    train.validate();
    if (!(inlier_threshold >= 0.0)) throw UsageError("inlier_threshold must be >= 0");
    if (directions.empty()) throw UsageError("at least one direction is required");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& k : key_table()) keys.emplace_back(k.name);
    return keys;
}

std::vector<std::string> parse_directions(std::string_view list) {
    std::vector<std::string> out;
    for (auto& d : split_list(list)) {
        if (d != "t2s" && d != "s2s" && d != "t2t")
            throw UsageError("unknown direction '" + d + "' (expected t2s, s2s or t2t)");
        if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(std::move(d));
    }
    if (out.empty()) throw UsageError("empty direction list");
    return out;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
    const auto& table = key_table();
    std::size_t lineno = 0;
    while (!text.empty()) {
        ++lineno;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw UsageError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        const auto it = std::find_if(table.begin(), table.end(), [&](const KeyDef& k) { return key == k.name; });
        if (it == table.end())
            throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
        try {
            it->set(base, value);
        } catch (const UsageError& e) {
            throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const UsageError& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

std::string echo_config(const RunConfig& config) {
    std::string out;
    for (const auto& k : key_table()) out += std::string(k.name) + " = " + k.get(config) + "\n";
    return out;
}

void write_state(const TargetState& state, const fs::path& path) {
    std::ostringstream os;
    os << "odam-state-v1 " << state.weights.size() << ' ' << state.epoch << '\n';
    for (std::size_t i = 0; i < state.weights.size(); ++i) {
        os << format_real(state.weights[i]);
        for (std::size_t c = 0; c < state.probs.cols(); ++c) os << ' ' << format_real(state.probs(i, c));
        os << ' ' << (state.classes[i] == PseudoClass::Inlier ? "inlier" : "outlier") << '\n';
    }
    write_text(path, os.str());
}

TargetState read_state(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open state " + path.string());
    std::string line;
    auto fail = [&](std::size_t n, const std::string& what) {
        throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + what);
    };
    if (!std::getline(is, line)) fail(1, "missing header");
    const auto h = split_ws(line);
    const auto n = h.size() == 3 ? parse_int(h[1]) : std::nullopt;
    const auto epoch = h.size() == 3 ? parse_int(h[2]) : std::nullopt;
    if (h.size() != 3 || h[0] != "odam-state-v1" || !n || *n < 0 || !epoch || *epoch < 0)
        fail(1, "bad header (expected 'odam-state-v1 <count> <epoch>')");
    TargetState st;
    st.epoch = static_cast<std::size_t>(*epoch);
    st.probs = Mat(static_cast<std::size_t>(*n), kNumClasses);
    for (std::size_t i = 0; i < static_cast<std::size_t>(*n); ++i) {
        if (!std::getline(is, line)) fail(i + 2, "missing row");
        const auto f = split_ws(line);
        if (f.size() != kNumClasses + 2) fail(i + 2, "expected weight, 3 probabilities and a class");
        const auto w = parse_real(f[0]);
        if (!w) fail(i + 2, "bad weight");
        st.weights.push_back(*w);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            const auto p = parse_real(f[c + 1]);
            if (!p) fail(i + 2, "bad probability");
            st.probs(i, c) = *p;
        }
        if (f.back() == "inlier")
            st.classes.push_back(PseudoClass::Inlier);
        else if (f.back() == "outlier")
            st.classes.push_back(PseudoClass::Outlier);
        else
            fail(i + 2, "class must be 'inlier' or 'outlier'");
    }
    return st;
}

DomainData cmd_gen(const RunConfig& config, const fs::path& out, std::ostream& log) {
    config.validate();
    DomainData d = config.toy.dim == 2 ? gen_toy(config.toy) : gen_clusters_nd(config.toy);
    make_dirs(out);
    write_dataset(d.source, out / "source.data");
    write_dataset(d.target, out / "target.data");
    write_text(out / "config.echo", echo_config(config));
    std::size_t outliers = 0;
    for (const auto& s : d.target) outliers += s.inlier ? 0 : 1;
    log << "source " << d.source.size() << " samples, target " << d.target.size() << " samples (" << outliers
        << " outliers), dim " << config.toy.dim << '\n';
    return d;
}

TrainReport cmd_train(const RunConfig& config, const fs::path& source_path, const fs::path& target_path,
                      const fs::path& out, std::ostream& log) {
    config.validate();
    const SplitData d = load_pair(source_path, target_path);
    const TrainData data = TrainData::from_samples(d.source, d.target);
    make_dirs(out);
    write_text(out / "config.echo", echo_config(config));

    std::ofstream train_log(out / "train.log", std::ios::binary);
    if (!train_log) throw std::runtime_error("cannot write " + (out / "train.log").string());
    train_log << "# epoch contrastive mmd entropy mean_weight_change seconds\n";
    const TrainReport report = run_training(data, config.train, [&](const EpochRecord& r, const TargetState&) {
        train_log << r.epoch << ' ' << format_real(r.contrastive) << ' ' << format_real(r.mmd) << ' '
                  << format_real(r.entropy) << ' ' << format_real(r.mean_weight_change) << ' '
                  << fixed(r.seconds, 3) << '\n';
    });
    train_log.flush();
    if (!train_log) throw std::runtime_error("failed writing " + (out / "train.log").string());

    write_checkpoint(report.params, {config.seed(), report.epochs.size()}, out / "checkpoint");
    write_state(report.final_state, out / "state");
    std::size_t inliers = 0;
    for (double w : report.final_state.weights) inliers += w >= config.inlier_threshold ? 1 : 0;
    log << mode_name(config.train.mode) << ": " << report.epochs.size() << " epochs"
        << (report.converged ? " (weights converged)" : "") << ", bandwidth " << format_real(report.bandwidth)
        << ", " << inliers << "/" << report.final_state.weights.size() << " targets classified inlier\n";
    return report;
}

EvalSummary cmd_eval(const RunConfig& config, const fs::path& run, const fs::path& source_path,
                     const fs::path& target_path, std::ostream& log) {
    config.validate();
    const SplitData d = load_pair(source_path, target_path);
    const NetParams params = read_checkpoint(run / "checkpoint");
    const std::size_t dim = d.source.front().features.size();
    if (params.config.input_dim != dim)
        throw std::runtime_error("checkpoint expects input dim " + std::to_string(params.config.input_dim) +
                                 ", data has dim " + std::to_string(dim));
    const TrainData data = TrainData::from_samples(d.source, d.target);

    std::vector<double> weights(d.target.size(), 1.0);
    if (fs::exists(run / "state")) {
        const TargetState st = read_state(run / "state");
        if (st.weights.size() != d.target.size())
            throw std::runtime_error("state has " + std::to_string(st.weights.size()) + " targets, data has " +
                                     std::to_string(d.target.size()));
        weights = st.weights;
    }
    const std::vector<bool> predicted = classify_inliers(weights, config.inlier_threshold);
    const std::vector<bool> truth = truth_inliers(d.target);
    const Mat se = embed(params, data.source);
    const Mat te = embed(params, data.target);
    const auto sid = identities(d.source);
    const auto tid = identities(d.target);

    make_dirs(run / "eval");
    make_dirs(run / "pr");
    EvalSummary summary;
    for (const std::string& dir : config.directions) {
        DirectionReport r;
        if (dir == "t2s")
            r = evaluate_direction(dir, te, tid, predicted, se, sid, false);
        else if (dir == "s2s")
            r = evaluate_direction(dir, se, sid, std::vector<bool>(sid.size(), true), se, sid, true);
        else
            r = evaluate_direction(dir, te, tid, predicted, te, tid, true);

        std::vector<std::pair<std::string, std::string>> kv{
            {"direction", dir},
            {"map", r.map.evaluated ? fixed(r.map.map, 6) : "none"},
            {"queries_total", std::to_string(r.queries_total)},
            {"queries_used", std::to_string(r.queries_used)},
            {"queries_evaluated", std::to_string(r.map.evaluated)},
            {"queries_skipped", std::to_string(r.map.skipped)},
        };
        for (std::size_t i = 0; i < r.recall_levels.size(); ++i)
            kv.emplace_back("precision_at_recall_" + fixed(r.recall_levels[i], 1), fixed(r.mean_precision[i], 6));
        write_report(run / "eval" / (dir + ".report"), kv);
        write_pr_data(run / "pr" / (dir + ".dat"), r.recall_levels, r.mean_precision);
        if (r.map.evaluated)
            log << dir << " MAP " << fixed(r.map.map) << " over " << r.map.evaluated << " queries\n";
        else
            log << dir << " MAP: no evaluable query\n";
        summary.directions.push_back(std::move(r));
    }

    summary.outliers = outlier_f1(predicted, truth);
    summary.target_outliers = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), false));
    const auto& s = summary.outliers;
    write_report(run / "eval" / "outliers.report",
                 {{"threshold", format_real(config.inlier_threshold)},
                  {"target_outliers", std::to_string(summary.target_outliers)},
                  {"predicted_outliers", std::to_string(s.true_pos + s.false_pos)},
                  {"true_pos", std::to_string(s.true_pos)},
                  {"false_pos", std::to_string(s.false_pos)},
                  {"false_neg", std::to_string(s.false_neg)},
                  {"precision", fixed(s.precision, 6)},
                  {"recall", fixed(s.recall, 6)},
                  {"f1", fixed(s.f1, 6)}});
    log << "outlier F1 " << fixed(s.f1) << " (precision " << fixed(s.precision) << ", recall " << fixed(s.recall)
        << ")\n";
    return summary;
}

CellResult run_cell(const RunConfig& base, double ratio, std::uint64_t seed, TrainMode mode, const fs::path& dir,
                    std::ostream& log) {
    RunConfig config = base;
    config.toy.outlier_ratio = ratio;
    config.set_seed(seed);
    config.train.mode = mode;
    config.directions = {"t2s", "s2s", "t2t"};

    const fs::path data_dir = dir / "data";
    const DomainData d = cmd_gen(config, data_dir, log);
    const fs::path run = dir / std::string(mode_name(mode));
    cmd_train(config, data_dir / "source.data", data_dir / "target.data", run, log);
    const EvalSummary ev = cmd_eval(config, run, data_dir / "source.data", data_dir / "target.data", log);

    CellResult c;
    c.ratio = ratio;
    c.seed = seed;
    c.mode = mode;
    auto map_of = [&](std::size_t i) { return ev.directions[i].map.evaluated ? ev.directions[i].map.map : 0.0; };
    c.map_t2s = map_of(0);
    c.map_s2s = map_of(1);
    c.map_t2t = map_of(2);
    c.f1 = ev.outliers.f1;
    const TrainData data = TrainData::from_samples(d.source, d.target);
    const TargetState init = init_target_state(data.source, data.target);
    c.init_f1 = outlier_f1(classify_inliers(init.weights, config.inlier_threshold), truth_inliers(d.target)).f1;
    return c;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<CellResult> cmd_sweep(const RunConfig& config, const std::vector<double>& ratios,
                                  const std::vector<std::uint64_t>& seeds, const fs::path& out, std::ostream& log) {
    if (ratios.empty()) throw UsageError("sweep needs at least one outlier ratio (--ratios)");
    if (seeds.empty()) throw UsageError("sweep needs at least one seed (--seeds)");
    for (double r : ratios) {
        RunConfig probe = config;
        probe.toy.outlier_ratio = r;
        probe.validate();
    }
    config.validate();
    make_dirs(out);
    write_text(out / "config.echo", echo_config(config));

    const std::array<TrainMode, 2> modes{TrainMode::DAOutlierDetection, TrainMode::SiameseDAOut};
    std::ofstream table(out / "table.txt", std::ios::binary);
    if (!table) throw std::runtime_error("cannot write " + (out / "table.txt").string());
    table << "# ratio seed mode map_t2s map_s2s map_t2t f1 init_f1\n";

    std::vector<CellResult> cells;
    for (double r : ratios)
        for (std::uint64_t seed : seeds) {
            const fs::path dir = out / ("r" + format_real(r) + "_s" + std::to_string(seed));
            for (TrainMode mode : modes) {
                log << "cell ratio " << format_real(r) << " seed " << seed << " " << mode_name(mode) << '\n';
                try {
                    cells.push_back(run_cell(config, r, seed, mode, dir, log));
                } catch (const std::exception& e) {
                    table << "# failed " << format_real(r) << ' ' << seed << ' ' << mode_name(mode) << ": " << e.what()
                          << '\n';
                    table.flush();
                    throw;
                }
                const CellResult& c = cells.back();
                table << format_real(c.ratio) << ' ' << c.seed << ' ' << mode_name(c.mode) << ' ' << fixed(c.map_t2s)
                      << ' ' << fixed(c.map_s2s) << ' ' << fixed(c.map_t2t) << ' ' << fixed(c.f1) << ' '
                      << fixed(c.init_f1) << '\n';
                table.flush();
            }
        }
    if (!table) throw std::runtime_error("failed writing " + (out / "table.txt").string());

    std::ostringstream summary;
    summary << "# ratio mode cells map_t2s_mean map_t2s_std f1_mean f1_std init_f1_mean\n";
    for (double r : ratios)
        for (TrainMode mode : modes) {
            std::vector<double> maps, f1s, inits;
            for (const CellResult& c : cells)
                if (c.ratio == r && c.mode == mode) {
                    maps.push_back(c.map_t2s);
                    f1s.push_back(c.f1);
                    inits.push_back(c.init_f1);
                }
            const auto [mm, ms] = mean_std(maps);
            const auto [fm, fsd] = mean_std(f1s);
            summary << format_real(r) << ' ' << mode_name(mode) << ' ' << maps.size() << ' ' << fixed(mm) << ' '
                    << fixed(ms) << ' ' << fixed(fm) << ' ' << fixed(fsd) << ' ' << fixed(mean_std(inits).first)
                    << '\n';
        }
    write_text(out / "summary.txt", summary.str());
    log << summary.str();
    return cells;
}

}  // namespace odam
