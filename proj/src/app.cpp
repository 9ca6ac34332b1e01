#include "hired/app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hired/checkpoint.hpp"
#include "hired/config.hpp"
#include "hired/csv.hpp"
#include "hired/error.hpp"
#include "hired/export.hpp"
#include "hired/synthetic.hpp"
#include "hired/theory.hpp"
#include "hired/trainer.hpp"

namespace hired {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << content;
}

json report_json(const MetricReport& r) {
    json levels = json::array();
    for (const auto& l : r.levels) {
        levels.push_back({{"level", l.level},
                          {"wape", l.wape_defined ? json(l.wape) : json(nullptr)},
                          {"smape", l.smape},
                          {"coherence", l.coherence}});
    }
    return {{"levels", levels},
            {"mean_wape", r.mean_wape},
            {"mean_smape", r.mean_smape},
            {"mean_coherence", r.mean_coherence}};
}

json history_json(const std::vector<EpochRecord>& history) {
    json out = json::array();
    for (const auto& h : history) {
        out.push_back({{"epoch", h.epoch},
                       {"train_loss", h.train_loss},
                       {"val_mean_wape", h.val_mean_wape},
                       {"lr", h.lr},
                       {"clipped_steps", h.clipped_steps},
                       {"regularizer", h.regularizer}});
    }
    return out;
}

json representatives_json(const RepresentativeSet& reps, const HierarchyTree& tree) {
    json out = json::array();
    for (std::size_t i = 0; i < reps.indices.size(); ++i) {
        out.push_back({{"node", reps.indices[i]},
                       {"name", tree.name(reps.indices[i])},
                       {"residual_norm", reps.residual_norms[i]}});
    }
    return out;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::size_t> epochs;
    std::optional<double> lambda_e;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Override train.seed");
    cmd->add_option("--mode", o.mode, "Override model.mode (full, no_reg, tvar_only, bd_only)");
    cmd->add_option("--epochs", o.epochs, "Override train.epochs");
    cmd->add_option("--lambda-e", o.lambda_e, "Override model.lambda_e");
}

RunConfig load_config(const std::string& path, const Overrides& o) {
    RunConfig cfg = RunConfig::load(path);
    if (o.seed) cfg.train.seed = *o.seed;
    if (o.mode) cfg.model.mode = parse_mode(*o.mode);
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.lambda_e) cfg.model.lambda_e = *o.lambda_e;
    if (cfg.train.patience > cfg.train.epochs) {
        cfg.train.patience = cfg.train.epochs;
    }
    cfg.validate();
    return cfg;
}

struct TrainedRun {
    Dataset data;
    TrainResult result;
    MetricReport test;
};

TrainedRun train_run(const RunConfig& cfg, const LogFn& log) {
    const TimePanel raw = load_panel(cfg.panel_source());
    TrainedRun run{prepare_dataset(raw, cfg.split(), cfg.model, cfg.data.standardize), {}, {}};
    if (log) {
        std::ostringstream os;
        os << "panel: " << run.data.panel.steps() << " steps, " << run.data.panel.series() << " series, "
           << run.data.panel.tree->level_count() << " levels; " << run.data.train.size() << " training windows";
        log(os.str());
    }
    run.result = train(cfg.model, cfg.train, run.data, log);
    run.test = evaluate(run.result.best, cfg.model, run.data, Segment::Test, cfg.metric_scale);
    return run;
}

json manifest_base(const std::string& command) {
    return {{"tool", "hired"}, {"version", HIRED_VERSION}, {"command", command}};
}

int cmd_ingest(const std::optional<std::string>& config_path, const PanelSource& direct,
               const std::optional<std::string>& out_path, std::ostream& out) {
    PanelSource source = direct;
    std::optional<RunConfig> cfg;
    if (config_path) {
        cfg = RunConfig::load(*config_path);
        source = cfg->panel_source();
    }
    if (source.values_path.empty() || source.hierarchy_path.empty()) {
        throw ConfigError("ingest needs --config or both --values and --hierarchy");
    }
    const TimePanel panel = load_panel(source);
    const HierarchyTree& tree = *panel.tree;
    json levels = json::array();
    for (std::size_t l = 0; l < tree.level_count(); ++l) {
        levels.push_back(tree.nodes_at_level(l).size());
    }
    json summary = manifest_base("ingest");
    summary["steps"] = panel.steps();
    summary["nodes"] = tree.node_count();
    summary["leaves"] = tree.leaves().size();
    summary["nodes_per_level"] = levels;
    summary["first_time"] = panel.time_index.front();
    summary["last_time"] = panel.time_index.back();
    summary["covariates"] = panel.covariate_names;
    summary["provenance"] = panel.provenance;
    if (cfg && !cfg->data.splits.empty()) {
        const SplitSpec split = cfg->split();
        split.validate(panel.steps());
        summary["splits"] = split.to_string();
        const TimePanel standardized = standardize(panel, split, cfg->data.standardize);
        const RepresentativeSet reps = select_representatives(standardized, split, cfg->model.representatives);
        summary["representatives"] = representatives_json(reps, tree);
    }
    const std::string text = summary.dump(2) + "\n";
    if (out_path) {
        write_file(*out_path, text);
    }
    out << text;
    return kExitOk;
}

int cmd_train(const std::string& config_path, const Overrides& o, const std::string& out_dir, bool quiet,
              std::ostream& out, std::ostream& err) {
    const RunConfig cfg = load_config(config_path, o);
    LogFn log;
    if (!quiet) {
        log = [&err](const std::string& line) { err << line << '\n' << std::flush; };
    }
    TrainedRun run = train_run(cfg, log);
    const fs::path dir(out_dir);
    fs::create_directories(dir);

    Checkpoint ck;
    ck.config = cfg;
    ck.nodes = run.data.panel.tree->names();
    ck.representatives = run.data.representatives.indices;
    ck.scaler = run.data.panel.scaler;
    ck.params = run.result.best;
    save_checkpoint(ck, (dir / "checkpoint.json").string());
    write_file(dir / "history.csv", history_csv(run.result.history));
    write_file(dir / "report.csv", run.test.to_csv());

    json manifest = manifest_base("train");
    manifest["config"] = cfg.to_json();
    manifest["seed"] = cfg.train.seed;
    manifest["splits"] = cfg.split().to_string();
    manifest["representatives"] = representatives_json(run.data.representatives, *run.data.panel.tree);
    manifest["parameter_count"] = parameter_count(run.result.best);
    manifest["parameters"] = parameter_names(run.result.best);
    manifest["best_epoch"] = run.result.best_epoch;
    manifest["best_val_mean_wape"] = run.result.best_val;
    manifest["stopped_early"] = run.result.stopped_early;
    if (run.result.best.embeddings) {
        manifest["best_regularizer"] = embedding_regularizer(*run.result.best.embeddings, *run.data.panel.tree);
    }
    manifest["history"] = history_json(run.result.history);
    manifest["test"] = report_json(run.test);
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    out << run.test.to_csv();
    return kExitOk;
}

/// Rebuilds the dataset a checkpoint was trained on and checks it still matches.
Dataset dataset_for(const Checkpoint& ck, const RunConfig& cfg) {
    const TimePanel raw = load_panel(cfg.panel_source());
    Dataset data = prepare_dataset(raw, cfg.split(), cfg.model, cfg.data.standardize);
    if (data.panel.tree->names() != ck.nodes) {
        throw DataError("the panel's hierarchy does not match the checkpoint's nodes");
    }
    if (data.representatives.indices != ck.representatives) {
        throw DataError("the panel selects different representatives than the checkpoint was trained with");
    }
    if (data.panel.covariate_dim() != ck.params.covariate_dim) {
        throw DataError("the panel has " + std::to_string(data.panel.covariate_dim()) +
                        " covariates; the checkpoint expects " + std::to_string(ck.params.covariate_dim));
    }
    data.panel.scaler = ck.scaler;
    return data;
}

RunConfig checkpoint_config(const Checkpoint& ck, const std::optional<std::string>& config_path) {
    RunConfig cfg = ck.config;
    if (config_path) {
        cfg.data = RunConfig::load(*config_path).data;
    }
    return cfg;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::optional<std::string>& config_path,
                 const std::string& segment, const std::optional<std::string>& scale,
                 const std::optional<std::string>& out_path, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    RunConfig cfg = checkpoint_config(ck, config_path);
    if (scale) {
        cfg.metric_scale = parse_metric_scale(*scale);
    }
    const Dataset data = dataset_for(ck, cfg);
    const MetricReport report = evaluate(ck.params, cfg.model, data, parse_segment(segment), cfg.metric_scale);
    if (out_path) {
        write_file(*out_path, report.to_csv());
    }
    out << report.to_csv();
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const Overrides& o, const std::string& out_dir,
               const std::vector<std::string>& modes, std::size_t runs, bool quiet, std::ostream& out,
               std::ostream& err) {
    const RunConfig base = load_config(config_path, o);
    if (runs == 0) {
        throw ConfigError("--runs must be positive");
    }
    LogFn log;
    if (!quiet) {
        log = [&err](const std::string& line) { err << line << '\n' << std::flush; };
    }
    struct Row {
        std::string mode;
        std::vector<MetricReport> reports;
    };
    std::vector<Row> rows;
    json manifest = manifest_base("ablate");
    manifest["config"] = base.to_json();
    manifest["runs"] = runs;
    json details = json::array();
    for (const auto& mode : modes) {
        Row row{mode, {}};
        for (std::size_t r = 0; r < runs; ++r) {
            RunConfig cfg = base;
            cfg.model.mode = parse_mode(mode);
            cfg.train.seed = base.train.seed + r;
            if (log) {
                log("mode " + mode + ", seed " + std::to_string(cfg.train.seed));
            }
            TrainedRun run = train_run(cfg, log);
            details.push_back({{"mode", mode},
                               {"seed", cfg.train.seed},
                               {"lambda_e", cfg.model.effective_lambda()},
                               {"parameter_count", parameter_count(run.result.best)},
                               {"best_epoch", run.result.best_epoch},
                               {"test", report_json(run.test)}});
            row.reports.push_back(run.test);
        }
        rows.push_back(std::move(row));
    }
    manifest["runs_detail"] = details;

    const std::size_t levels = rows.front().reports.front().levels.size();
    auto average = [&](const Row& row, auto field) {
        std::vector<double> acc(levels + 1, 0.0);
        for (const auto& rep : row.reports) {
            for (std::size_t l = 0; l < levels; ++l) {
                acc[l] += field(rep.levels[l]);
            }
            acc[levels] += field(rep);
        }
        for (auto& v : acc) {
            v /= static_cast<double>(row.reports.size());
        }
        return acc;
    };
    std::ostringstream table;
    std::ostringstream coherence;
    table << "mode";
    for (const char* metric : {"wape", "smape"}) {
        for (std::size_t l = 0; l < levels; ++l) {
            table << ',' << metric << "_level" << l;
        }
        table << ',' << metric << "_mean";
    }
    table << '\n';
    coherence << "mode";
    for (std::size_t l = 0; l < levels; ++l) {
        coherence << ",coherence_level" << l;
    }
    coherence << ",coherence_mean\n";
    struct Wape {
        double operator()(const LevelMetrics& l) const { return l.wape; }
        double operator()(const MetricReport& r) const { return r.mean_wape; }
    };
    struct Smape {
        double operator()(const LevelMetrics& l) const { return l.smape; }
        double operator()(const MetricReport& r) const { return r.mean_smape; }
    };
    struct Coherence {
        double operator()(const LevelMetrics& l) const { return l.coherence; }
        double operator()(const MetricReport& r) const { return r.mean_coherence; }
    };
    for (const auto& row : rows) {
        table << row.mode;
        for (double v : average(row, Wape{})) table << ',' << csv::format_double(v);
        for (double v : average(row, Smape{})) table << ',' << csv::format_double(v);
        table << '\n';
        coherence << row.mode;
        for (double v : average(row, Coherence{})) coherence << ',' << csv::format_double(v);
        coherence << '\n';
    }
    const fs::path dir(out_dir);
    write_file(dir / "ablation.csv", table.str());
    write_file(dir / "coherence.csv", coherence.str());
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    out << table.str();
    return kExitOk;
}

int cmd_theory(const std::string& preset, std::optional<std::size_t> trials, std::uint64_t seed, std::size_t threads,
               const std::optional<std::string>& out_path, std::ostream& out) {
    std::string csv;
    if (preset == "theorem1") {
        theory::Theorem1Options o;
        o.seed = seed;
        o.threads = threads;
        if (trials) o.trials = *trials;
        const auto rows = theory::mc_theorem1(o);
        csv = theory::theorem1_csv(rows);
    } else if (preset == "lemma1") {
        theory::Lemma1Options o;
        o.seed = seed;
        if (trials) o.trials = *trials;
        const auto result = theory::lemma1_experiment(o);
        csv = theory::lemma1_csv(result);
        std::ostringstream summary;
        summary << "recovered " << result.recovered << " of " << result.trials.size() << " trials ("
                << result.recovery_rate() * 100.0 << "%), skipped " << result.skipped << '\n';
        out << summary.str();
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected lemma1 or theorem1)");
    }
    if (out_path) {
        write_file(*out_path, csv);
    }
    out << csv;
    return kExitOk;
}

int cmd_export(const std::string& checkpoint_path, const std::optional<std::string>& config_path,
               const std::optional<std::string>& segment, const std::optional<std::string>& span,
               const std::string& out_dir, bool svg, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const RunConfig cfg = checkpoint_config(ck, config_path);
    const Dataset data = dataset_for(ck, cfg);
    std::vector<std::size_t> origins;
    if (span) {
        std::size_t first = 0, last = 0;
        char dash = 0;
        std::istringstream in(*span);
        if (!(in >> first >> dash >> last) || dash != '-' || !in.eof()) {
            throw ConfigError("--span must look like FIRST-LAST (1-based timesteps), got '" + *span + "'");
        }
        origins = span_origins(first, last, cfg.model.history, cfg.model.horizon, data.panel.steps());
    } else {
        const Segment seg = parse_segment(segment.value_or("test"));
        const auto& windows = data.windows(seg);
        for (const auto& w : windows) {
            origins.push_back(w.origin);
        }
        std::sort(origins.begin(), origins.end());
        origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
        if (seg == Segment::Train) {
            // Training windows overlap; keep every F-th origin for a contiguous span.
            std::vector<std::size_t> spaced;
            for (std::size_t o : origins) {
                if (spaced.empty() || o >= spaced.back() + cfg.model.horizon) {
                    spaced.push_back(o);
                }
            }
            origins = std::move(spaced);
        }
    }
    const BasisExport ex = export_basis(ck.params, cfg.model, data.panel, data.z, origins);
    const fs::path dir(out_dir);
    write_file(dir / "basis.csv", basis_csv(ex, data.panel.time_index));
    write_file(dir / "embeddings.csv", embeddings_csv(ex, *data.panel.tree));
    if (svg) {
        write_file(dir / "basis.svg", basis_svg(ex));
    }
    out << "wrote " << ex.basis.rows() << " basis rows x " << ex.basis.cols() << " dims and "
        << ex.embeddings.rows() << " embeddings to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_synth(const SyntheticOptions& o, const std::string& out_dir, std::ostream& out) {
    const SyntheticData data = generate_synthetic(o);
    write_synthetic(data, out_dir);
    out << "wrote " << data.leaf_names.size() << " leaves x " << o.steps << " steps to " << out_dir << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"HiReD: hierarchical forecasting with TVAR + basis decomposition"};
    app.name("hired");
    app.require_subcommand(1);
    app.set_version_flag("--version", HIRED_VERSION);

    auto* ingest = app.add_subcommand("ingest", "Load and validate a panel, print a JSON summary");
    std::optional<std::string> ingest_config, ingest_out, ingest_cov;
    std::string ingest_values, ingest_hierarchy;
    bool ingest_no_header = false;
    ingest->add_option("--config", ingest_config, "Run config (JSON); takes the data section from it");
    ingest->add_option("--values", ingest_values, "Wide CSV of values (time column first)");
    ingest->add_option("--hierarchy", ingest_hierarchy, "child,parent edge CSV");
    ingest->add_option("--covariates", ingest_cov, "Wide CSV of covariates aligned with --values");
    ingest->add_flag("--no-header", ingest_no_header, "The hierarchy file has no header row");
    ingest->add_option("--out", ingest_out, "Also write the summary to this file");

    auto* train_cmd = app.add_subcommand("train", "Train a model and write manifest, checkpoint and history");
    std::string train_config, train_out;
    bool train_quiet = false;
    Overrides train_over;
    train_cmd->add_option("--config", train_config, "Run config (JSON)")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();
    train_cmd->add_flag("--quiet", train_quiet, "Suppress per-epoch progress on stderr");
    add_overrides(train_cmd, train_over);

    auto* eval_cmd = app.add_subcommand("evaluate", "Per-level metrics of a checkpoint on a segment");
    std::string eval_ck, eval_segment = "test";
    std::optional<std::string> eval_config, eval_out, eval_scale;
    eval_cmd->add_option("--checkpoint", eval_ck, "checkpoint.json from train")->required();
    eval_cmd->add_option("--config", eval_config, "Take the data section from this config instead");
    eval_cmd->add_option("--segment", eval_segment, "train, val or test")->capture_default_str();
    eval_cmd->add_option("--metric-scale", eval_scale, "rescaled (mean property) or raw (sums)");
    eval_cmd->add_option("--out", eval_out, "Also write the report CSV here");

    auto* ablate = app.add_subcommand("ablate", "Train every model mode and compare test metrics");
    std::string ablate_config, ablate_out;
    std::vector<std::string> ablate_modes = {"full", "no_reg", "tvar_only", "bd_only"};
    std::size_t ablate_runs = 1;
    bool ablate_quiet = false;
    Overrides ablate_over;
    ablate->add_option("--config", ablate_config, "Run config (JSON)")->required();
    ablate->add_option("--out", ablate_out, "Output directory")->required();
    ablate->add_option("--modes", ablate_modes, "Modes to train")->capture_default_str();
    ablate->add_option("--runs", ablate_runs, "Seeds per mode (seed, seed+1, ...); metrics are averaged")
        ->capture_default_str();
    ablate->add_flag("--quiet", ablate_quiet, "Suppress progress on stderr");
    add_overrides(ablate, ablate_over);

    auto* theory_cmd = app.add_subcommand("theory-sim", "Monte Carlo checks of the recovery guarantees");
    std::string preset;
    std::optional<std::size_t> theory_trials;
    std::uint64_t theory_seed = 0;
    std::size_t theory_threads = 1;
    std::optional<std::string> theory_out;
    theory_cmd->add_option("--preset", preset, "lemma1 or theorem1")->required();
    theory_cmd->add_option("--trials", theory_trials, "Trials (default 200 for lemma1, 2000 for theorem1)");
    theory_cmd->add_option("--seed", theory_seed, "Seed")->capture_default_str();
    theory_cmd->add_option("--threads", theory_threads, "Worker threads for theorem1")->capture_default_str();
    theory_cmd->add_option("--out", theory_out, "Write the CSV here");

    auto* export_cmd = app.add_subcommand("export-basis", "Export basis vectors and embeddings of a checkpoint");
    std::string export_ck, export_out;
    std::optional<std::string> export_config, export_segment, export_span;
    bool export_svg = false;
    export_cmd->add_option("--checkpoint", export_ck, "checkpoint.json from train")->required();
    export_cmd->add_option("--config", export_config, "Take the data section from this config instead");
    export_cmd->add_option("--segment", export_segment, "Rolling windows of train, val or test (default test)");
    export_cmd->add_option("--span", export_span, "Target steps FIRST-LAST (1-based), exported F steps at a time");
    export_cmd->add_option("--out", export_out, "Output directory")->required();
    export_cmd->add_flag("--svg", export_svg, "Also write basis.svg");
    export_cmd->get_option("--segment")->excludes("--span");

    auto* synth = app.add_subcommand("synth", "Write the synthetic hierarchical dataset");
    SyntheticOptions synth_opts;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_opts.seed, "Seed")->capture_default_str();
    synth->add_option("--steps", synth_opts.steps, "Timesteps")->capture_default_str();
    synth->add_option("--groups", synth_opts.groups, "Middle-level nodes")->capture_default_str();
    synth->add_option("--leaves-per-group", synth_opts.leaves_per_group, "Leaves under each group")
        ->capture_default_str();
    synth->add_option("--noise", synth_opts.noise, "Leaf noise relative to level")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: usage_error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) {
            PanelSource direct;
            direct.values_path = ingest_values;
            direct.hierarchy_path = ingest_hierarchy;
            direct.covariates_path = ingest_cov;
            direct.hierarchy_has_header = !ingest_no_header;
            return cmd_ingest(ingest_config, direct, ingest_out, out);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_config, train_over, train_out, train_quiet, out, err);
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(eval_ck, eval_config, eval_segment, eval_scale, eval_out, out);
        }
        if (ablate->parsed()) {
            return cmd_ablate(ablate_config, ablate_over, ablate_out, ablate_modes, ablate_runs, ablate_quiet, out,
                              err);
        }
        if (theory_cmd->parsed()) {
            return cmd_theory(preset, theory_trials, theory_seed, theory_threads, theory_out, out);
        }
        if (export_cmd->parsed()) {
            return cmd_export(export_ck, export_config, export_segment, export_span, export_out, export_svg, out);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_opts, synth_out, out);
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: runtime_error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace hired
