#include "aal/errors.hpp"
#include "aal/experiment.hpp"
#include "aal/gradcheck.hpp"
#include "aal/theory.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> preset;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config, "Experiment config file");
    app->add_option("--seed", o.seed, "Base seed");
    app->add_option("--out", o.out, "Output directory");
    app->add_option("--preset", o.preset, "Dataset preset")->check(CLI::IsMember({"gaussian", "twomoons"}));
    app->add_option("--set", o.overrides, "Override as section.key=value (repeatable)");
}

aal::ExperimentSpec load_spec(const CommonOptions& o) {
    aal::ExperimentSpec spec = o.config.empty() ? aal::ExperimentSpec{} : aal::parse_config(o.config);
    if (o.seed) spec.train.seed = *o.seed;
    if (o.out) spec.out_dir = *o.out;
    if (o.preset) aal::apply_setting(spec, "dataset", "preset", *o.preset);
    for (const std::string& kv : o.overrides) {
        const auto dot = kv.find('.');
        const auto eq = kv.find('=');
        if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
            throw std::invalid_argument("override '" + kv + "' is not section.key=value");
        }
        aal::apply_setting(spec, kv.substr(0, dot), kv.substr(dot + 1, eq - dot - 1), kv.substr(eq + 1));
    }
    spec.validate();
    return spec;
}

std::string short_number(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

void print_metrics(const std::string& label, double os, const std::optional<double>& os_star,
                   const std::optional<double>& un) {
    std::printf("%-24s OS %.4f  OS* %s  UN %s\n", label.c_str(), os, short_number(os_star).c_str(),
                short_number(un).c_str());
}

int cmd_generate(const CommonOptions& o) {
    const aal::ExperimentSpec spec = load_spec(o);
    if (spec.dataset.kind == aal::DatasetKind::csv) throw std::invalid_argument("generate needs a synthetic preset");
    aal::ensure_writable_dir(spec.out_dir);
    const aal::OsdaDataset data = aal::load_dataset(spec.dataset, spec.train.seed);
    aal::save_csv(data, spec.out_dir / "source.csv", spec.out_dir / "target.csv");
    std::printf("wrote %s and %s (%zu source rows, %zu target rows)\n", (spec.out_dir / "source.csv").c_str(),
                (spec.out_dir / "target.csv").c_str(), data.x_src.rows, data.x_tgt.rows);
    return 0;
}

int cmd_train(const CommonOptions& o) {
    aal::ExperimentSpec spec = load_spec(o);
    spec.repeats = 1;
    spec.baselines.clear();
    const aal::ExperimentSummary s = aal::run_experiment(spec);
    const auto& r = s.runs.front();
    for (const auto& p : r.curve) {
        std::printf("iter %6zu  OS %.4f  OS* %s  UN %s\n", p.metrics.iter, p.metrics.os,
                    short_number(p.metrics.os_star).c_str(), short_number(p.metrics.un).c_str());
    }
    print_metrics("final", r.final_metrics.os, r.final_metrics.os_star, r.final_metrics.un);
    return 0;
}

int cmd_experiment(const CommonOptions& o) {
    const aal::ExperimentSummary s = aal::run_experiment(load_spec(o));
    for (const auto& m : s.methods) print_metrics(m.method, m.os, m.os_star, m.un);
    return 0;
}

int cmd_ablate(const CommonOptions& o) {
    for (const auto& c : aal::run_ablation_grid(load_spec(o))) {
        print_metrics(std::string("W=") + (c.use_w ? "on " : "off") + " alpha=" + (c.use_alpha ? "on " : "off"),
                      c.summary.os, c.summary.os_star, c.summary.un);
    }
    return 0;
}

int cmd_theory(const CommonOptions& o, aal::theory::TrialSettings settings) {
    const aal::ExperimentSpec spec = load_spec(o);
    aal::ensure_writable_dir(spec.out_dir);
    settings.seed = spec.train.seed;
    std::vector<aal::theory::TrialRecord> all;
    bool ok = true;
    for (bool weighted : {false, true}) {
        settings.weighted = weighted;
        auto trials = aal::theory::run_trials(settings);
        double d_dev = 0.0;
        double id_err = 0.0;
        std::size_t negative = 0;
        for (const auto& t : trials) {
            d_dev = std::max(d_dev, t.diverged ? INFINITY : t.max_abs_d_deviation);
            id_err = std::max(id_err, t.identity_error);
            negative += t.jsd_negative;
        }
        std::printf("%-10s max |D - D*| %.3e  max identity error %.3e  negative JSD %zu\n",
                    weighted ? "weighted" : "unweighted", d_dev, id_err, negative);
        ok = ok && d_dev < 1e-3 && id_err < 1e-10;
        all.insert(all.end(), trials.begin(), trials.end());
    }
    aal::write_theory_report(spec.out_dir / "theory_report.csv", all);
    return ok ? 0 : 1;
}

int cmd_check_grads(std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    aal::GradCheckSettings settings;
    settings.seed = seed;
    bool ok = true;
    for (const auto& c : aal::run_gradcheck_suite(settings)) {
        std::printf("%-4s %-26s max rel error %.3e\n", c.report.pass ? "ok" : "FAIL", c.name.c_str(),
                    c.report.max_rel_error);
        ok = ok && c.report.pass;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s in %.2f s\n", ok ? "all gradients match" : "gradient mismatch", secs);
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set domain adaptation with against-adversarial learning"};
    app.require_subcommand(1);

    CommonOptions opts;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as source.csv and target.csv");
    auto* train = app.add_subcommand("train", "Train once and write curves, result, checkpoint and embeddings");
    auto* experiment = app.add_subcommand("experiment", "Repeated runs with baselines and summary.csv");
    auto* ablate = app.add_subcommand("ablate", "2x2 grid over the W and alpha weights");
    auto* theory = app.add_subcommand("theory", "Verify optimal discriminators on random discrete joints");
    auto* grads = app.add_subcommand("check-grads", "Finite-difference check of the autodiff engine");
    for (auto* sub : {generate, train, experiment, ablate, theory}) add_common(sub, opts);

    aal::theory::TrialSettings trial_settings;
    theory->add_option("--trials", trial_settings.trials, "Random joints per setting");
    theory->add_option("--points", trial_settings.points, "Support size");
    theory->add_option("--steps", trial_settings.steps, "Ascent steps");

    std::uint64_t grad_seed = 0;
    grads->add_option("--seed", grad_seed, "Seed for random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) return cmd_generate(opts);
        if (*train) return cmd_train(opts);
        if (*experiment) return cmd_experiment(opts);
        if (*ablate) return cmd_ablate(opts);
        if (*theory) return cmd_theory(opts, trial_settings);
        if (*grads) return cmd_check_grads(grad_seed);
    } catch (const aal::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
