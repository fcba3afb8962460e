#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "unisync/error.hpp"

namespace unisync::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCommands[] = {"synth", "train", "dub", "composite", "eval", "sweep", "gradcheck"};

std::string clip_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "clip_%04zu", i);
    return buf;
}

// Runs body(i) for i < n on `jobs` threads. The first error is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex m;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!first) first = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < workers; ++j) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

std::vector<Clip> load_or_make(const std::string& dir, const CorpusSpec& spec) {
    return dir.empty() ? make_corpus(spec) : read_corpus(dir);
}

ModelParams load_model(const RunConfig& cfg, const char* command) {
    if (cfg.paths.checkpoint.empty()) {
        fail(ErrorKind::Config, std::string("paths.checkpoint must be set for ") + command);
    }
    return load_checkpoint(cfg.paths.checkpoint, cfg.model);
}

fs::path frames_dir(const RunConfig& cfg, std::size_t clip, const std::string& subdir, const char* command) {
    if (cfg.paths.frames.empty()) fail(ErrorKind::Config, std::string("paths.frames must be set for ") + command);
    return fs::path(cfg.paths.frames) / clip_name(clip) / subdir;
}

void print_summary(std::ostream& out, const std::string& label, const EvalSummary& s) {
    out << label << " cells=" << s.cells << " background_psnr=" << format_metric(s.background_psnr)
        << " sync_corr=" << format_metric(s.sync_corr) << " pose_drift=" << format_metric(s.pose_drift)
        << " boundary_grad=" << format_metric(s.boundary_grad) << " gsr=" << format_metric(s.gsr) << '\n';
}

int cmd_synth(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    const auto train = make_corpus(cfg.train_corpus());
    write_corpus(train, dir / "corpus");
    const auto eval = make_corpus(cfg.eval_corpus());
    write_corpus(eval, dir / "eval_corpus");
    out << "corpus=" << (dir / "corpus").string() << " clips=" << train.size() << '\n';
    out << "eval_corpus=" << (dir / "eval_corpus").string() << " clips=" << eval.size() << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    const auto clips = load_or_make(cfg.paths.corpus, cfg.train_corpus());
    const auto data = make_train_clips(clips, cfg.codec, cfg.model);
    ModelParams p = cfg.paths.checkpoint.empty() ? init_params(cfg.model, RngStream(cfg.seed).split("init"))
                                                 : load_checkpoint(cfg.paths.checkpoint, cfg.model);
    TrainState state(std::move(p));
    const auto log = train(state, data, cfg.train, dir, [&](const TrainLogRow& r) {
        if (r.step % 100 == 0) out << "step=" << r.step << " loss=" << format_metric(r.loss) << '\n';
    });
    if (!log.empty()) out << "final_loss=" << format_metric(log.back().loss) << '\n';
    out << "checkpoint=" << (dir / "model.unis").string() << '\n';
    return 0;
}

int cmd_dub(const RunConfig& cfg, const fs::path& dir, const RunOptions& opts, std::ostream& out) {
    const ModelParams params = load_model(cfg, "dub");
    const NetworkModel model(params);
    const auto clips = load_or_make(cfg.paths.eval_corpus, cfg.eval_corpus());
    const PipelineConfig pc = cfg.pipeline();
    std::vector<std::size_t> injections(clips.size());
    parallel_for(clips.size(), opts.jobs, [&](std::size_t i) {
        const DubResult r = dub_clip(clips[i], model, pc);
        const fs::path cd = dir / clip_name(i);
        fs::create_directories(cd);
        save_grid(r.z0, cd / "z0.grid");
        write_frames(r.x_gen, cd / "generated");
        write_frames(r.composite.weight, cd / "weight");
        write_frames(r.composite.x_hat, cd / "composited");
        injections[i] = r.injections;
    });
    out << "clips=" << clips.size() << " injections_per_clip=" << (injections.empty() ? 0 : injections[0]) << '\n';
    return 0;
}

int cmd_composite(const RunConfig& cfg, const fs::path& dir, const RunOptions& opts, std::ostream& out) {
    const auto clips = load_or_make(cfg.paths.eval_corpus, cfg.eval_corpus());
    std::vector<double> grads(clips.size());
    parallel_for(clips.size(), opts.jobs, [&](std::size_t i) {
        const FrameSequence gen = read_frames(frames_dir(cfg, i, "generated", "composite"));
        const CompositeResult r = composite_clip(clips[i], gen, cfg.composite, opts.hard_paste);
        write_frames(r.x_hat, dir / clip_name(i) / "composited");
        write_frames(r.weight, dir / clip_name(i) / "weight");
        grads[i] = boundary_grad(r.weight);
    });
    const double g = grads.empty() ? 0.0 : *std::max_element(grads.begin(), grads.end());
    out << "clips=" << clips.size() << " max_boundary_grad=" << format_metric(g) << '\n';
    return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& dir, const RunOptions& opts, std::ostream& out) {
    const auto clips = load_or_make(cfg.paths.eval_corpus, cfg.eval_corpus());
    std::vector<ClipMetrics> rows(clips.size());
    parallel_for(clips.size(), opts.jobs, [&](std::size_t i) {
        const FrameSequence x_hat = read_frames(frames_dir(cfg, i, cfg.eval.frames_subdir, "eval"));
        try {
            rows[i] = measure_frames(clips[i], x_hat, cfg.composite);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config) throw;
            rows[i] = ClipMetrics{};
            rows[i].background_psnr = std::nan("");
            rows[i].error = e.what();
        }
        rows[i].tau = cfg.sampler.tau_inj;
        rows[i].seed = cfg.sampler.seed;
        rows[i].clip = i;
    });
    write_metrics_csv(rows, dir / "eval.csv");
    SweepResult s;
    s.taus = {cfg.sampler.tau_inj};
    s.per_tau = {summarize(rows)};
    write_summary_csv(s, dir / "summary.csv");
    print_summary(out, "eval", s.per_tau[0]);
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& dir, const RunOptions& opts, std::ostream& out) {
    const ModelParams params = load_model(cfg, "sweep");
    const NetworkModel model(params);
    const auto clips = load_or_make(cfg.paths.eval_corpus, cfg.eval_corpus());
    const SweepResult s = tau_sweep(clips, model, cfg.pipeline(), cfg.eval.taus, cfg.eval.seeds, opts.jobs);
    write_metrics_csv(s.rows, dir / "sweep.csv");
    write_summary_csv(s, dir / "sweep_summary.csv");
    for (std::size_t i = 0; i < s.taus.size(); ++i) print_summary(out, "tau=" + format_metric(s.taus[i]), s.per_tau[i]);
    return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    // two tokens per axis at the configured width: 2 x 4 x 4 latent with the default patch
    ModelConfig small = cfg.model;
    small.latent_frames = 2 * small.patch_frames;
    small.latent_height = 2 * small.patch_spatial;
    small.latent_width = 2 * small.patch_spatial;
    const ModelParams params = init_params(small, RngStream(cfg.seed).split("init"));
    const auto batch = synthetic_micro_batch(small, 2, cfg.seed);
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport r = grad_check(params, batch, cfg.train, cfg.eval.gradcheck_probes, cfg.seed,
                                         cfg.eval.gradcheck_step);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = r.max_rel_err <= cfg.eval.gradcheck_threshold;
    json report = {{"max_rel_err", r.max_rel_err},     {"worst_tensor", r.worst_tensor},
                   {"worst_analytic", r.worst_analytic}, {"worst_numeric", r.worst_numeric},
                   {"probes", r.probes},               {"float_path_max_rel", r.float_path_max_rel},
                   {"threshold", cfg.eval.gradcheck_threshold}, {"pass", pass}};
    std::ofstream(dir / "gradcheck.json") << report.dump(2) << '\n';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", secs);
    out << "max_rel_err=" << format_metric(r.max_rel_err) << " worst=" << r.worst_tensor << " probes=" << r.probes
        << " seconds=" << buf << " threshold=" << format_metric(cfg.eval.gradcheck_threshold)
        << (pass ? " PASS" : " FAIL") << '\n';
    return pass ? 0 : 1;
}

}  // namespace

bool is_command(const std::string& name) {
    return std::find(std::begin(kCommands), std::end(kCommands), name) != std::end(kCommands);
}

fs::path make_run_dir(const std::string& command, const RunConfig& cfg, const json& resolved) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    localtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    return fs::path(cfg.paths.out_dir) / (command + "-" + stamp + "-" + config_hash(resolved));
}

int run(const std::string& command, const RunConfig& cfg, const json& resolved, const RunOptions& opts,
        std::ostream& out) {
    if (!is_command(command)) fail(ErrorKind::Config, "unknown command '" + command + "'");
    const fs::path dir = opts.run_dir.empty() ? make_run_dir(command, cfg, resolved) : opts.run_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create run directory " + dir.string() + ": " + ec.message());
    {
        std::ofstream f(dir / "resolved_config.json");
        f << resolved.dump(2) << '\n';
        if (!f) fail(ErrorKind::Io, "cannot write " + (dir / "resolved_config.json").string());
    }
    out << "run_dir=" << dir.string() << " config_hash=" << config_hash(resolved) << '\n';
    if (command == "synth") return cmd_synth(cfg, dir, out);
    if (command == "train") return cmd_train(cfg, dir, out);
    if (command == "dub") return cmd_dub(cfg, dir, opts, out);
    if (command == "composite") return cmd_composite(cfg, dir, opts, out);
    if (command == "eval") return cmd_eval(cfg, dir, opts, out);
    if (command == "sweep") return cmd_sweep(cfg, dir, opts, out);
    return cmd_gradcheck(cfg, dir, out);
}

}  // namespace unisync::cli
