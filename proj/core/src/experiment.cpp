#include "aal/experiment.hpp"

#include "aal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace aal {

namespace fs = std::filesystem;

const char* to_string(DatasetKind k) {
    switch (k) {
    case DatasetKind::gaussian: return "gaussian";
    case DatasetKind::twomoons: return "twomoons";
    case DatasetKind::csv: return "csv";
    }
    return "?";
}

const char* to_string(Baseline b) {
    switch (b) {
    case Baseline::source_only: return "source_only";
    case Baseline::unweighted_adversarial: return "unweighted_adversarial";
    }
    return "?";
}

void ExperimentSpec::validate() const {
    if (repeats < 1) throw ContractError("repeats must be at least 1");
    if (name.empty()) throw ContractError("experiment name must not be empty");
    if (out_dir.empty()) throw ContractError("out_dir must not be empty");
    if (dataset.kind == DatasetKind::csv && (dataset.source_csv.empty() || dataset.target_csv.empty())) {
        throw ContractError("csv dataset needs both source and target paths");
    }
    train.validate();
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Thrown by the value parsers; the caller attaches the line number.
struct BadValue {
    std::string what;
};

template <typename T>
T parse_integer(std::string_view v, std::string_view key) {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw BadValue{std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'"};
    }
    return out;
}

double parse_double(std::string_view v, std::string_view key) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) {
        throw BadValue{std::string(key) + ": expected a finite number, got '" + std::string(v) + "'"};
    }
    return out;
}

bool parse_bool(std::string_view v, std::string_view key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw BadValue{std::string(key) + ": expected true or false, got '" + std::string(v) + "'"};
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(trim(v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

using Setter = std::function<void(ExperimentSpec&, std::string_view)>;
using SectionTable = std::map<std::string, Setter, std::less<>>;

const std::map<std::string, SectionTable, std::less<>>& tables() {
    static const std::map<std::string, SectionTable, std::less<>> t = [] {
        std::map<std::string, SectionTable, std::less<>> m;

        auto& ex = m["experiment"];
        ex["name"] = [](ExperimentSpec& s, std::string_view v) {
            if (v.empty()) throw BadValue{"name: must not be empty"};
            s.name = v;
        };
        ex["repeats"] = [](ExperimentSpec& s, std::string_view v) {
            s.repeats = parse_integer<std::size_t>(v, "repeats");
            if (s.repeats < 1) throw BadValue{"repeats: must be at least 1"};
        };
        ex["seed"] = [](ExperimentSpec& s, std::string_view v) {
            s.train.seed = parse_integer<std::uint64_t>(v, "seed");
        };
        ex["out_dir"] = [](ExperimentSpec& s, std::string_view v) {
            if (v.empty()) throw BadValue{"out_dir: must not be empty"};
            s.out_dir = std::string(v);
        };
        ex["baselines"] = [](ExperimentSpec& s, std::string_view v) {
            s.baselines.clear();
            if (v.empty() || v == "none") return;
            for (std::string_view item : split_list(v)) {
                Baseline b;
                if (item == "source_only") {
                    b = Baseline::source_only;
                } else if (item == "unweighted_adversarial") {
                    b = Baseline::unweighted_adversarial;
                } else {
                    throw BadValue{"baselines: unknown baseline '" + std::string(item) + "'"};
                }
                if (std::find(s.baselines.begin(), s.baselines.end(), b) == s.baselines.end()) {
                    s.baselines.push_back(b);
                }
            }
        };

        auto& ds = m["dataset"];
        ds["preset"] = [](ExperimentSpec& s, std::string_view v) {
            if (v == "gaussian") {
                s.dataset.kind = DatasetKind::gaussian;
            } else if (v == "twomoons") {
                s.dataset.kind = DatasetKind::twomoons;
            } else if (v == "csv") {
                s.dataset.kind = DatasetKind::csv;
            } else {
                throw BadValue{"preset: expected gaussian, twomoons or csv, got '" + std::string(v) + "'"};
            }
        };
        ds["n_per_cat"] = [](ExperimentSpec& s, std::string_view v) {
            const auto n = parse_integer<std::size_t>(v, "n_per_cat");
            s.dataset.gaussian.n_per_cat = n;
            s.dataset.twomoons.n_per_cat = n;
        };
        ds["c"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.c = parse_integer<std::size_t>(v, "c");
        };
        ds["n_unknown_cats"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.n_unknown_cats = parse_integer<std::size_t>(v, "n_unknown_cats");
        };
        ds["radius"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.radius = parse_double(v, "radius");
        };
        ds["noise"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.noise = parse_double(v, "noise");
        };
        ds["unknown_scale"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.unknown_scale = parse_double(v, "unknown_scale");
        };
        ds["shift_x"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.shift.translate_x = parse_double(v, "shift_x");
        };
        ds["shift_y"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.shift.translate_y = parse_double(v, "shift_y");
        };
        ds["rotation_deg"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.gaussian.shift.rotation_deg = parse_double(v, "rotation_deg");
        };
        ds["moons_noise"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.twomoons.noise = parse_double(v, "moons_noise");
        };
        ds["moons_rotation_deg"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.twomoons.rotation_deg = parse_double(v, "moons_rotation_deg");
        };
        ds["unknown_radius"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.twomoons.unknown_radius = parse_double(v, "unknown_radius");
        };
        ds["unknown_noise"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.twomoons.unknown_noise = parse_double(v, "unknown_noise");
        };
        ds["source"] = [](ExperimentSpec& s, std::string_view v) { s.dataset.source_csv = std::string(v); };
        ds["target"] = [](ExperimentSpec& s, std::string_view v) { s.dataset.target_csv = std::string(v); };
        ds["known_classes"] = [](ExperimentSpec& s, std::string_view v) {
            if (v == "auto") {
                s.dataset.csv.c.reset();
            } else {
                s.dataset.csv.c = parse_integer<std::size_t>(v, "known_classes");
            }
        };
        ds["standardize"] = [](ExperimentSpec& s, std::string_view v) {
            s.dataset.csv.standardize = parse_bool(v, "standardize");
        };

        auto& tr = m["train"];
        auto size_field = [](std::size_t TrainConfig::*f, const char* key) {
            return [f, key](ExperimentSpec& s, std::string_view v) { s.train.*f = parse_integer<std::size_t>(v, key); };
        };
        auto double_field = [](double TrainConfig::*f, const char* key) {
            return [f, key](ExperimentSpec& s, std::string_view v) { s.train.*f = parse_double(v, key); };
        };
        auto bool_field = [](bool TrainConfig::*f, const char* key) {
            return [f, key](ExperimentSpec& s, std::string_view v) { s.train.*f = parse_bool(v, key); };
        };
        tr["max_iter"] = size_field(&TrainConfig::max_iter, "max_iter");
        tr["batch_size"] = size_field(&TrainConfig::batch_size, "batch_size");
        tr["base_lr_f"] = double_field(&TrainConfig::base_lr_f, "base_lr_f");
        tr["base_lr_fstar"] = double_field(&TrainConfig::base_lr_fstar, "base_lr_fstar");
        tr["base_lr_adv"] = double_field(&TrainConfig::base_lr_adv, "base_lr_adv");
        tr["lr_scale_backbone"] = double_field(&TrainConfig::lr_scale_backbone, "lr_scale_backbone");
        tr["gamma"] = double_field(&TrainConfig::gamma, "gamma");
        tr["gamma_f"] = [](ExperimentSpec& s, std::string_view v) {
            if (v == "auto") {
                s.train.gamma_f.reset();
            } else {
                s.train.gamma_f = parse_double(v, "gamma_f");
            }
        };
        tr["power"] = double_field(&TrainConfig::power, "power");
        tr["momentum"] = double_field(&TrainConfig::momentum, "momentum");
        tr["lambda_grl"] = double_field(&TrainConfig::lambda_grl, "lambda_grl");
        tr["lambda_ramp"] = bool_field(&TrainConfig::lambda_ramp, "lambda_ramp");
        tr["use_w"] = bool_field(&TrainConfig::use_w, "use_w");
        tr["use_alpha"] = bool_field(&TrainConfig::use_alpha, "use_alpha");
        tr["dropout_rate"] = double_field(&TrainConfig::dropout_rate, "dropout_rate");
        tr["eval_every"] = size_field(&TrainConfig::eval_every, "eval_every");
        tr["checkpoint_every"] = size_field(&TrainConfig::checkpoint_every, "checkpoint_every");
        tr["g_widths"] = [](ExperimentSpec& s, std::string_view v) {
            std::vector<std::size_t> widths;
            for (std::string_view item : split_list(v)) widths.push_back(parse_integer<std::size_t>(item, "g_widths"));
            s.train.g_widths = std::move(widths);
        };
        tr["d_b"] = size_field(&TrainConfig::d_b, "d_b");
        tr["h_d"] = size_field(&TrainConfig::h_d, "h_d");
        return m;
    }();
    return t;
}

void apply_at(ExperimentSpec& spec, std::string_view section, std::string_view key, std::string_view value,
              std::size_t line) {
    const auto sec = tables().find(section);
    if (sec == tables().end()) throw ParseError("unknown section [" + std::string(section) + "]", line);
    const auto it = sec->second.find(key);
    if (it == sec->second.end()) {
        throw ParseError("unknown key '" + std::string(key) + "' in [" + std::string(section) + "]", line);
    }
    try {
        it->second(spec, value);
    } catch (const BadValue& e) {
        throw ParseError(e.what, line);
    }
}

} // namespace

void apply_setting(ExperimentSpec& spec, std::string_view section, std::string_view key, std::string_view value) {
    apply_at(spec, section, trim(key), trim(value), 0);
}

ExperimentSpec parse_config_text(std::string_view text) {
    ExperimentSpec spec;
    std::string section;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("malformed section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (!tables().contains(section)) throw ParseError("unknown section [" + section + "]", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
        if (section.empty()) throw ParseError("key outside of any section", line_no);
        const std::string_view key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("missing key", line_no);
        apply_at(spec, section, key, trim(line.substr(eq + 1)), line_no);
    }
    return spec;
}

ExperimentSpec parse_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config " + path.string(), 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------

OsdaDataset load_dataset(const DatasetSource& source, std::uint64_t seed) {
    switch (source.kind) {
    case DatasetKind::gaussian: return gen_gaussian_osda(source.gaussian, seed);
    case DatasetKind::twomoons: return gen_twomoons_osda(source.twomoons, seed);
    case DatasetKind::csv: return load_csv(source.source_csv, source.target_csv, source.csv);
    }
    throw ContractError("unknown dataset kind");
}

void ensure_writable_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw std::runtime_error("cannot create output directory " + dir.string() +
                                 (ec ? ": " + ec.message() : std::string()));
    }
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!(out << "ok")) throw std::runtime_error("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

// ---------------------------------------------------------------------------
// CSV writers

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : "nan"; }

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
    return s;
}

} // namespace

void write_curves_csv(const fs::path& path, const std::vector<CurvePoint>& curve) {
    auto out = open_out(path);
    out << "iter,OS,OS_star,UN,loss_F,loss_Fstar,V\n";
    for (const auto& p : curve) {
        out << p.metrics.iter << ',' << format_number(p.metrics.os) << ',' << format_number(p.metrics.os_star) << ','
            << format_number(p.metrics.un) << ',' << format_number(p.loss_f) << ',' << format_number(p.loss_fstar)
            << ',' << format_number(p.value) << '\n';
    }
    finish(out, path);
}

void write_result_csv(const fs::path& path, const MetricsRecord& m) {
    auto out = open_out(path);
    out << "OS,OS_star,UN,excluded\n";
    out << format_number(m.os) << ',' << format_number(m.os_star) << ',' << format_number(m.un) << ','
        << join_ints(m.excluded_cats) << '\n';
    finish(out, path);
}

void write_embeddings_csv(const fs::path& path, const Matrix& features, std::span<const int> hidden_labels) {
    if (features.rows != hidden_labels.size()) {
        throw DimensionError("embeddings: " + std::to_string(features.rows) + " rows but " +
                             std::to_string(hidden_labels.size()) + " labels");
    }
    auto out = open_out(path);
    for (std::size_t j = 0; j < features.cols; ++j) out << "f_" << j << ',';
    out << "hidden_label\n";
    for (std::size_t r = 0; r < features.rows; ++r) {
        for (double v : features.row(r)) out << format_number(v) << ',';
        out << hidden_labels[r] << '\n';
    }
    finish(out, path);
}

void write_summary_csv(const fs::path& path, const std::vector<MethodSummary>& methods) {
    auto out = open_out(path);
    out << "method,repeats,OS,OS_star,UN\n";
    for (const auto& m : methods) {
        out << m.method << ',' << m.repeats << ',' << format_number(m.os) << ',' << format_number(m.os_star) << ','
            << format_number(m.un) << '\n';
    }
    finish(out, path);
}

void write_ablation_csv(const fs::path& path, const std::vector<AblationCell>& cells) {
    auto out = open_out(path);
    out << "use_w,use_alpha,OS,OS_star,UN\n";
    for (const auto& c : cells) {
        out << (c.use_w ? "true" : "false") << ',' << (c.use_alpha ? "true" : "false") << ','
            << format_number(c.summary.os) << ',' << format_number(c.summary.os_star) << ','
            << format_number(c.summary.un) << '\n';
    }
    finish(out, path);
}

void write_theory_report(const fs::path& path, const std::vector<theory::TrialRecord>& trials) {
    auto out = open_out(path);
    out << "trial,weighted,max_abs_d_deviation,abs_value_deviation,value_direct,value_jsd_form,identity_error,jsd,"
           "jsd_negative,diverged\n";
    for (const auto& t : trials) {
        out << t.trial << ',' << (t.weighted ? "true" : "false") << ',' << format_number(t.max_abs_d_deviation)
            << ',' << format_number(t.abs_value_deviation) << ',' << format_number(t.value_direct) << ','
            << format_number(t.value_jsd_form) << ',' << format_number(t.identity_error) << ','
            << format_number(t.jsd) << ',' << (t.jsd_negative ? "true" : "false") << ','
            << (t.diverged ? "true" : "false") << '\n';
    }
    finish(out, path);
}

MethodSummary summarize(const std::string& method, const std::vector<MetricsRecord>& results) {
    MethodSummary s;
    s.method = method;
    s.repeats = results.size();
    if (results.empty()) throw ContractError("summarize: no results");
    double os = 0.0;
    double os_star = 0.0;
    double un = 0.0;
    std::size_t n_star = 0;
    std::size_t n_un = 0;
    for (const auto& r : results) {
        os += r.os;
        if (r.os_star) {
            os_star += *r.os_star;
            ++n_star;
        }
        if (r.un) {
            un += *r.un;
            ++n_un;
        }
    }
    s.os = os / static_cast<double>(results.size());
    if (n_star) s.os_star = os_star / static_cast<double>(n_star);
    if (n_un) s.un = un / static_cast<double>(n_un);
    return s;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

enum class Method { aal, source_only };

RunRecord run_one(const OsdaDataset& data, const TrainConfig& cfg, Method method, const std::string& name,
                  std::size_t repeat, const fs::path& run_dir) {
    fs::create_directories(run_dir);
    TrainResult tr = method == Method::aal ? train(data, cfg) : train_source_only(data, cfg);

    const std::vector<int> truth = data.evaluation_labels();
    const std::vector<int> pred =
        method == Method::aal ? predict_open(tr.model, data.x_tgt) : predict_known(tr.model, data.x_tgt);
    RunRecord rec;
    rec.method = name;
    rec.repeat = repeat;
    rec.seed = cfg.seed;
    rec.final_metrics = evaluate_predictions(truth, pred, data.c);
    rec.final_metrics.iter = cfg.max_iter;
    rec.curve = std::move(tr.curve);

    write_curves_csv(run_dir / "curves.csv", rec.curve);
    write_result_csv(run_dir / "result.csv", rec.final_metrics);
    save_checkpoint(run_dir / "checkpoint.txt", tr.model, config_hash(cfg));
    write_embeddings_csv(run_dir / "embeddings.csv", embed(tr.model, data.x_tgt), data.y_tgt_hidden);
    return rec;
}

MethodSummary run_method(const ExperimentSpec& spec, const OsdaDataset& data, const TrainConfig& base, Method method,
                         const std::string& name, const fs::path& dir, std::vector<RunRecord>* runs) {
    std::vector<MetricsRecord> results;
    for (std::size_t k = 0; k < spec.repeats; ++k) {
        TrainConfig cfg = base;
        cfg.seed = base.seed + k;
        RunRecord rec = run_one(data, cfg, method, name, k, dir / ("run_" + std::to_string(k)));
        results.push_back(rec.final_metrics);
        if (runs) runs->push_back(std::move(rec));
    }
    return summarize(name, results);
}

OsdaDataset prepare(const ExperimentSpec& spec) {
    spec.validate();
    ensure_writable_dir(spec.out_dir);
    OsdaDataset data = load_dataset(spec.dataset, spec.train.seed);
    data.validate();
    return data;
}

} // namespace

ExperimentSummary run_experiment(const ExperimentSpec& spec) {
    const OsdaDataset data = prepare(spec);
    ExperimentSummary out;
    out.methods.push_back(run_method(spec, data, spec.train, Method::aal, "aal", spec.out_dir / "aal", &out.runs));
    for (Baseline b : spec.baselines) {
        TrainConfig cfg = spec.train;
        Method m = Method::aal;
        if (b == Baseline::source_only) {
            m = Method::source_only;
        } else {
            cfg.use_w = false;
            cfg.use_alpha = false;
        }
        const std::string name = to_string(b);
        out.methods.push_back(run_method(spec, data, cfg, m, name, spec.out_dir / name, &out.runs));
    }
    write_summary_csv(spec.out_dir / "summary.csv", out.methods);
    return out;
}

std::vector<AblationCell> run_ablation_grid(const ExperimentSpec& spec) {
    const OsdaDataset data = prepare(spec);
    std::vector<AblationCell> cells;
    for (bool use_w : {false, true}) {
        for (bool use_alpha : {false, true}) {
            TrainConfig cfg = spec.train;
            cfg.use_w = use_w;
            cfg.use_alpha = use_alpha;
            const std::string name =
                std::string("w_") + (use_w ? "on" : "off") + "_alpha_" + (use_alpha ? "on" : "off");
            cells.push_back({use_w, use_alpha,
                             run_method(spec, data, cfg, Method::aal, name, spec.out_dir / "ablation" / name, nullptr)});
        }
    }
    write_ablation_csv(spec.out_dir / "ablation.csv", cells);
    return cells;
}

} // namespace aal
