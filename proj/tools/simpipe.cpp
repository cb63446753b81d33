// simpipe: command-line front end of the traffic dataset pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"
#include "simpipe/metrics.hpp"
#include "simpipe/mobility.hpp"
#include "simpipe/orchestrator.hpp"
#include "simpipe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace simpipe;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::int64_t> worker_id;
    std::optional<std::int64_t> workers;
    std::optional<double> timeout_s;
    std::optional<std::string> out;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required)
{
    auto* c = app->add_option("--config", f.config, "Pipeline configuration (JSON)");
    if (config_required)
        c->required();
    app->add_option("--seed", f.seed, "Base seed; replaces every stage seed");
    app->add_option("--mode", f.mode, "singular or distributed")->check(CLI::IsMember({"singular", "distributed"}));
    app->add_option("--worker-id", f.worker_id, "This worker's id (distributed mode)");
    app->add_option("--workers", f.workers, "Number of workers (distributed mode)");
    app->add_option("--timeout-s", f.timeout_s, "Per-trigger timeout in seconds");
    app->add_option("--out", f.out, "Master output directory");
}

pipeline::PipelineConfig load_config(const CommonFlags& f)
{
    auto c = pipeline::load_pipeline_config(f.config);
    if (f.seed) {
        c.seeds = pipeline::derive_stage_seeds(*f.seed);
        c.document["seed"] = *f.seed;
        c.document.erase("seeds");
    }
    if (f.mode) {
        c.mode = pipeline::mode_from_string(*f.mode);
        c.document["mode"] = *f.mode;
    }
    if (f.worker_id) {
        c.worker_id = *f.worker_id;
        c.document["worker_id"] = *f.worker_id;
    }
    if (f.workers) {
        c.worker_count = *f.workers;
        c.document["workers"] = *f.workers;
    }
    if (f.timeout_s) {
        c.timeout_s = *f.timeout_s;
        c.document["timeout_s"] = *f.timeout_s;
    }
    if (f.out)
        c.master_dir = *f.out;
    c.validate();
    return c;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Per-figure tables: conformity bars from reports, runtimes from run manifests.
void write_plotdata(const std::vector<std::string>& reports, const std::vector<std::string>& manifests,
                    const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    std::string bars = "candidate\treference\tlatency\tduration\tfrequency\tsize\taggregate\n";
    for (const auto& r : reports) {
        auto parsed = metrics::parse_tsv_report(fsutil::read_text(r));
        if (!parsed.conformity)
            continue;
        const auto& c = *parsed.conformity;
        bars += c.candidate_label + '\t' + c.reference_label;
        for (double s : c.similarity)
            bars += '\t' + fmt(s);
        bars += '\t' + fmt(c.aggregate) + '\n';
    }
    fsutil::atomic_write(out_dir / "conformity.tsv", bars);

    std::string runtime = "label\tmode\tworker\tusers\tstage\tautomated_s\tmonitored_s\n";
    for (const auto& m : manifests) {
        auto doc = json::parse(fsutil::read_text(m));
        std::string users = "NA";
        for (const auto& s : doc.value("stages", json::array()))
            if (s.value("name", "") == "traffic" && s.contains("element_count"))
                users = std::to_string(s["element_count"].get<std::size_t>());
        auto prefix = doc.value("label", std::string("run")) + '\t' + doc.value("mode", std::string()) + '\t' +
                      std::to_string(doc.value("worker_id", 0)) + '\t' + users + '\t';
        const auto wall = doc.value("wall_clock", json::object());
        const auto stages = wall.value("stages", json::object());
        for (const auto& [stage, t] : stages.items())
            if (t.contains("automated_s"))
                runtime += prefix + stage + '\t' + fmt(t["automated_s"].get<double>()) + '\t' +
                           fmt(t.value("monitored_s", 0.0)) + '\n';
        runtime += prefix + "total\t" + fmt(wall.value("automated_s", 0.0)) + '\t' + fmt(wall.value("monitored_s", 0.0)) +
                   '\n';
    }
    fsutil::atomic_write(out_dir / "runtime.tsv", runtime);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Synthetic 5G-over-OTN traffic dataset pipeline"};
    app.require_subcommand(1);

    CommonFlags mob_f, traf_f, trans_f, rep_f, run_f;

    auto* mob = app.add_subcommand("mobility", "Generate or import a mobility trace and export it");
    add_common(mob, mob_f, false);
    std::string import_path, export_path;
    mob->add_option("--import", import_path, "Existing trace to import and re-export");
    mob->add_option("--export", export_path, "Write the trace here instead of the master directory");

    auto* traf = app.add_subcommand("traffic", "Assign applications and emit per-user captures");
    add_common(traf, traf_f, false);
    std::string rename_dir, rename_map;
    traf->add_option("--rename", rename_dir, "Rename foreign captures in this directory to canonical names");
    traf->add_option("--rename-map", rename_map, "Two-column TSV: original name, new name");

    auto* trans = app.add_subcommand("transport", "Groom flows, simulate the optical network and truncate captures");
    add_common(trans, trans_f, true);

    auto* rep = app.add_subcommand("report", "Per-user metrics and dataset conformity");
    add_common(rep, rep_f, false);
    std::string rep_dir, rep_egress, rep_reference, rep_format = "tsv", rep_file;
    rep->add_option("--dir", rep_dir, "Directory holding ingress captures (and manifest.json)");
    rep->add_option("--egress-dir", rep_egress, "Directory holding egress captures (default: --dir)");
    rep->add_option("--reference", rep_reference, "Reference dataset directory for conformity");
    rep->add_option("--format", rep_format, "tsv or json-lines");
    rep->add_option("--report", rep_file, "Report path (default: stdout)");

    auto* run = app.add_subcommand("run", "Run the whole pipeline from one configuration");
    add_common(run, run_f, true);

    auto* plot = app.add_subcommand("plotdata", "Emit data tables for conformity bars and runtime comparisons");
    std::vector<std::string> plot_reports, plot_manifests;
    std::string plot_out;
    plot->add_option("--report", plot_reports, "TSV reports carrying conformity lines");
    plot->add_option("--manifest", plot_manifests, "Run manifests");
    plot->add_option("--out", plot_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*mob) {
            if (!import_path.empty()) {
                if (export_path.empty())
                    throw config_error("--import needs --export");
                auto trace = mobility::import_trace(import_path);
                trace.validate();
                auto n = mobility::export_trace(trace, export_path);
                std::cout << "element_count\t" << n << '\n';
                return 0;
            }
            if (mob_f.config.empty())
                throw config_error("mobility needs --config or --import");
            auto cfg = load_config(mob_f);
            auto n = pipeline::run_mobility_stage(cfg);
            auto trace = pipeline::StageDirs::under(cfg.master_dir).trace();
            if (!export_path.empty())
                fs::copy_file(trace, export_path, fs::copy_options::overwrite_existing);
            std::cout << "element_count\t" << n << '\n';
        } else if (*traf) {
            if (!rename_dir.empty()) {
                orchestrator::RenameMap map;
                if (!rename_map.empty())
                    map = orchestrator::read_rename_map(rename_map);
                std::cout << "renamed\t" << orchestrator::rename_batch(rename_dir, map) << '\n';
                return 0;
            }
            if (traf_f.config.empty())
                throw config_error("traffic needs --config or --rename");
            auto cfg = load_config(traf_f);
            auto plan = pipeline::plan_traffic(cfg);
            auto written = pipeline::run_traffic_stage(cfg, plan);
            std::cout << "element_count\t" << plan.element_count << "\nactive_users\t" << plan.active_users
                      << "\nwritten\t" << written << '\n';
        } else if (*trans) {
            auto cfg = load_config(trans_f);
            auto s = pipeline::run_transport_stage(cfg);
            std::cout << "flows\t" << s.flows << "\nchannels\t" << s.channels << "\nunroutable\t" << s.unroutable
                      << "\nwritten\t" << s.written << '\n';
        } else if (*rep) {
            if (!rep_f.config.empty() && rep_dir.empty()) {
                auto cfg = load_config(rep_f);
                std::cout << pipeline::run_report_stage(cfg).string() << '\n';
                return 0;
            }
            if (rep_dir.empty())
                throw config_error("report needs --config or --dir");
            auto format = metrics::report_format_from_string(rep_format);
            auto pairing = metrics::pair_streams(rep_dir, rep_egress.empty() ? rep_dir : rep_egress);
            std::vector<metrics::UserMetrics> rows;
            for (const auto& p : pairing.pairs)
                rows.push_back(metrics::compute_user_metrics(metrics::load_pair(p)));
            std::optional<metrics::ConformityReport> conformity;
            if (!rep_reference.empty()) {
                conformity = metrics::conformity_score(metrics::extract_features(rep_dir),
                                                       metrics::extract_features(rep_reference));
                conformity->candidate_label = fs::path(rep_dir).filename().string();
                conformity->reference_label = fs::path(rep_reference).filename().string();
            }
            if (rep_file.empty())
                std::cout << metrics::render_report(rows, conformity, format);
            else
                metrics::export_report(rows, conformity, rep_file, format);
        } else if (*run) {
            auto cfg = load_config(run_f);
            std::cout << pipeline::run_pipeline(cfg).string() << '\n';
        } else if (*plot) {
            write_plotdata(plot_reports, plot_manifests, plot_out);
        }
    } catch (const config_error& e) {
        std::cerr << "simpipe: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const trigger_timeout& e) {
        std::cerr << "simpipe: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "simpipe: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
