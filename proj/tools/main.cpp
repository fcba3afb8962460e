#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"
#include "unisync/error.hpp"

namespace {

using unisync::cli::json;

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

int report(const char* kind, const std::string& msg, int status) {
    std::cerr << "error[" << kind << "]: " << one_line(msg) << std::endl;
    return status;
}

json read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) unisync::fail(unisync::ErrorKind::Config, "config: cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        unisync::fail(unisync::ErrorKind::Config, "config: " + path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unisync: synthetic talking-head dubbing with masked latent injection"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::vector<std::string> sets;
    std::optional<double> tau_inj, blur_sigma;
    std::optional<std::size_t> steps, dilate_radius;
    std::optional<std::string> injection_level, out_dir, checkpoint, corpus, eval_corpus, frames;
    std::size_t jobs = 1;
    std::string run_dir;
    bool hard = false, print_config = false;

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"synth", "write the training and eval corpora"},
        {"train", "train the velocity network"},
        {"dub", "encode, sample, decode and composite every eval clip"},
        {"composite", "blend previously generated frames over the source clips"},
        {"eval", "score frames against the eval corpus"},
        {"sweep", "dub and score over eval.taus x eval.seeds"},
        {"gradcheck", "finite-difference check of the analytic gradient"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "JSON config file (defaults apply to missing keys)");
        sub->add_option("--set", sets, "override, section.key=value")->take_all();
        sub->add_option("--tau-inj", tau_inj, "sampler.tau_inj");
        sub->add_option("--steps", steps, "sampling steps (sampler.steps and schedule.steps)");
        sub->add_option("--injection-level", injection_level, "sampler.injection_level: current or next");
        sub->add_option("--dilate-radius", dilate_radius, "composite.dilate_radius");
        sub->add_option("--blur-sigma", blur_sigma, "composite.blur_sigma");
        sub->add_option("--out-dir", out_dir, "paths.out_dir");
        sub->add_option("--checkpoint", checkpoint, "paths.checkpoint");
        sub->add_option("--corpus", corpus, "paths.corpus");
        sub->add_option("--eval-corpus", eval_corpus, "paths.eval_corpus");
        sub->add_option("--frames", frames, "paths.frames");
        sub->add_option("-j,--jobs", jobs, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
        sub->add_option("--run-dir", run_dir, "use this run directory instead of a derived one");
        sub->add_flag("--print-config", print_config, "print the resolved config and exit");
        if (std::string(name) == "composite") sub->add_flag("--hard", hard, "paste with the raw mask, no dilate or blur");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), 2);
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        json doc = unisync::cli::merge_config(config_path.empty() ? json() : read_config_file(config_path));
        for (const auto& s : sets) unisync::cli::apply_override(doc, s);
        auto set = [&](const std::string& path, const json& v) { unisync::cli::apply_override(doc, path + "=" + v.dump()); };
        if (tau_inj) set("sampler.tau_inj", *tau_inj);
        if (steps) {
            set("sampler.steps", *steps);
            set("schedule.steps", *steps);
        }
        if (injection_level) set("sampler.injection_level", *injection_level);
        if (dilate_radius) set("composite.dilate_radius", *dilate_radius);
        if (blur_sigma) set("composite.blur_sigma", *blur_sigma);
        if (out_dir) set("paths.out_dir", *out_dir);
        if (checkpoint) set("paths.checkpoint", *checkpoint);
        if (corpus) set("paths.corpus", *corpus);
        if (eval_corpus) set("paths.eval_corpus", *eval_corpus);
        if (frames) set("paths.frames", *frames);

        const unisync::cli::RunConfig cfg = unisync::cli::parse_config(doc);
        if (print_config) {
            std::cout << doc.dump(2) << std::endl;
            return 0;
        }
        unisync::cli::RunOptions opts;
        opts.jobs = jobs;
        opts.hard_paste = hard;
        opts.run_dir = run_dir;
        return unisync::cli::run(command, cfg, doc, opts, std::cout);
    } catch (const unisync::Error& e) {
        return report(unisync::to_string(e.kind()), e.what(), e.kind() == unisync::ErrorKind::Config ? 2 : 1);
    } catch (const json::exception& e) {
        return report("config", e.what(), 2);
    } catch (const std::exception& e) {
        return report("internal", e.what(), 1);
    }
}
