#pragma once

// Experiment configuration and the generate / sample / learn / eval / bench
// commands behind the `bgi` executable.
//
// Files inside the output directory:
//   mdp.json, truth.json        generate
//   trajectories.jsonl          sample
//   learned.json, trace.csv     learn
//   eval.json, gap_curve.csv, action_stats.csv    eval
//   bench.csv                   bench

#include "bgi/environments.hpp"
#include "bgi/irl_solver.hpp"
#include "bgi/metrics.hpp"
#include "bgi/serialization.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace bgi::cli {

namespace fs = std::filesystem;

/// Exit status: 0 success, 1 usage/config error, 2 runtime failure.
enum ExitCode : int { kSuccess = 0, kConfigError = 1, kRuntimeError = 2 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrajectoryConfig {
    std::size_t count = 50;
    std::size_t length = 10;
    std::uint64_t seed = 0;
};

struct EvalConfig {
    std::vector<double> k_grid;  // empty: method default
    std::vector<double> b_grid{1.0, 10.0, 100.0};
};

struct BenchConfig {
    std::vector<std::size_t> sizes{25, 100, 400, 1600};
    std::size_t n_colors = 2;
    std::size_t n_objects = 2;
    double pnorm_k = 100.0;
    double gsoft_k = 10.0;
    std::size_t trajectories = 50;
    std::size_t length = 10;
    std::uint64_t seed = 0;
    /// Each measurement repeats the iteration until this much time has elapsed.
    double min_seconds = 0.2;
};

struct ExperimentConfig {
    std::variant<GridworldSpec, ObjectworldSpec> environment = GridworldSpec{};
    SmoothingConfig smoothing;
    MotionModelConfig motion;
    LearnConfig learn;  // its smoothing/motion are overwritten from the fields above
    TrajectoryConfig trajectory;
    EvalConfig eval;
    BenchConfig bench;
    fs::path output_dir = "out";

    LearnConfig learn_config() const {
        LearnConfig out = learn;
        out.smoothing = smoothing;
        out.motion = motion;
        return out;
    }
};

/// Command-line overrides; each takes precedence over the config file.
struct Overrides {
    std::optional<fs::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<double> k;
    std::optional<double> b;
};

namespace detail {

// Reads fields of one JSON object and rejects any key that was not consumed.
class ObjectReader {
public:
    ObjectReader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError(where() + ": expected a JSON object");
    }

    template <class T>
    void read(const char* key, T& target) {
        seen_.insert(key);
        const auto it = doc_.find(key);
        if (it == doc_.end()) return;
        try {
            target = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(field_path(key) + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    std::string field_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (const auto& [key, value] : doc_.items())
            if (!seen_.count(key)) throw ConfigError("unknown config field '" + field_path(key) + "'");
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
void validated(const std::string& path, F&& check) {
    try {
        check();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    detail::ObjectReader top(doc, "");

    if (const json* env = top.child("environment")) {
        detail::ObjectReader r(*env, "environment");
        std::string type = "gridworld";
        r.read("type", type);
        if (type == "gridworld") {
            GridworldSpec spec;
            r.read("n", spec.n);
            r.read("noise", spec.noise);
            r.read("discount", spec.discount);
            detail::validated("environment", [&] { spec.validate(); });
            cfg.environment = spec;
        } else if (type == "objectworld") {
            ObjectworldSpec spec;
            r.read("n", spec.n);
            r.read("n_colors", spec.n_colors);
            r.read("n_objects", spec.n_objects);
            r.read("noise", spec.noise);
            r.read("discount", spec.discount);
            r.read("seed", spec.seed);
            detail::validated("environment", [&] { spec.validate(); });
            cfg.environment = spec;
        } else {
            throw ConfigError("environment.type: expected gridworld or objectworld, got '" + type + "'");
        }
        r.finish();
    }
    if (const json* sm = top.child("smoothing")) {
        detail::ObjectReader r(*sm, "smoothing");
        std::string method(to_string(cfg.smoothing.method));
        r.read("method", method);
        detail::validated("smoothing.method",
                          [&] { cfg.smoothing.method = parse_smoothing_method(method); });
        r.read("k", cfg.smoothing.k);
        r.read("threshold", cfg.smoothing.threshold);
        r.read("max_iterations", cfg.smoothing.max_iterations);
        r.read("reward_offset", cfg.smoothing.reward_offset);
        r.finish();
    }
    if (const json* mo = top.child("motion")) {
        detail::ObjectReader r(*mo, "motion");
        r.read("b", cfg.motion.b);
        r.finish();
    }
    if (const json* le = top.child("learn")) {
        detail::ObjectReader r(*le, "learn");
        r.read("learning_rate", cfg.learn.learning_rate);
        r.read("epochs", cfg.learn.epochs);
        r.read("restarts", cfg.learn.n_restarts);
        r.read("seed", cfg.learn.rng_seed);
        r.read("init_scale", cfg.learn.init_scale);
        r.read("threads", cfg.learn.n_threads);
        r.read("gradient_threshold", cfg.learn.gradient.threshold);
        r.read("gradient_max_iterations", cfg.learn.gradient.max_iterations);
        r.finish();
    }
    if (const json* tr = top.child("trajectory")) {
        detail::ObjectReader r(*tr, "trajectory");
        r.read("count", cfg.trajectory.count);
        r.read("length", cfg.trajectory.length);
        r.read("seed", cfg.trajectory.seed);
        r.finish();
    }
    if (const json* ev = top.child("eval")) {
        detail::ObjectReader r(*ev, "eval");
        r.read("k_grid", cfg.eval.k_grid);
        r.read("b_grid", cfg.eval.b_grid);
        r.finish();
    }
    if (const json* be = top.child("bench")) {
        detail::ObjectReader r(*be, "bench");
        r.read("sizes", cfg.bench.sizes);
        r.read("n_colors", cfg.bench.n_colors);
        r.read("n_objects", cfg.bench.n_objects);
        r.read("pnorm_k", cfg.bench.pnorm_k);
        r.read("gsoft_k", cfg.bench.gsoft_k);
        r.read("trajectories", cfg.bench.trajectories);
        r.read("length", cfg.bench.length);
        r.read("seed", cfg.bench.seed);
        r.read("min_seconds", cfg.bench.min_seconds);
        r.finish();
    }
    std::string out_dir = cfg.output_dir.string();
    top.read("output_dir", out_dir);
    cfg.output_dir = out_dir;
    top.finish();

    detail::validated("smoothing", [&] { cfg.smoothing.validate(); });
    detail::validated("motion", [&] { cfg.motion.validate(); });
    detail::validated("learn", [&] { cfg.learn_config().validate(); });
    if (cfg.trajectory.count == 0 || cfg.trajectory.length == 0)
        throw ConfigError("trajectory: count and length must be positive");
    if (!std::is_sorted(cfg.eval.k_grid.begin(), cfg.eval.k_grid.end()))
        throw ConfigError("eval.k_grid: must be sorted ascending");
    for (std::size_t size : cfg.bench.sizes) {
        const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(size))));
        if (n < 2 || n * n != size)
            throw ConfigError("bench.sizes: " + std::to_string(size) + " is not a square grid size");
    }
    return cfg;
}

/// Parses a config document; syntax errors report the line number.
inline ExperimentConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config line " + std::to_string(detail::line_of_offset(text, e.byte)) +
                          ": " + e.what());
    }
    return parse_config(doc);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline ExperimentConfig load_config(const std::optional<fs::path>& path) {
    if (!path) return ExperimentConfig{};
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path->string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

/// Applies command-line overrides. `seed` targets the seed the command consumes.
inline void apply_overrides(ExperimentConfig& cfg, const Overrides& o, std::string_view command) {
    if (o.out) cfg.output_dir = *o.out;
    if (o.method) {
        detail::validated("--method", [&] { cfg.smoothing.method = parse_smoothing_method(*o.method); });
    }
    if (o.k) cfg.smoothing.k = *o.k;
    if (o.b) cfg.motion.b = *o.b;
    if (o.seed) {
        if (command == "generate") {
            if (auto* spec = std::get_if<ObjectworldSpec>(&cfg.environment)) spec->seed = *o.seed;
        } else if (command == "sample") {
            cfg.trajectory.seed = *o.seed;
        } else if (command == "learn") {
            cfg.learn.rng_seed = *o.seed;
        } else if (command == "bench") {
            cfg.bench.seed = *o.seed;
        }
    }
    detail::validated("smoothing", [&] { cfg.smoothing.validate(); });
    detail::validated("motion", [&] { cfg.motion.validate(); });
}

inline json environment_to_json(const std::variant<GridworldSpec, ObjectworldSpec>& env) {
    if (const auto* g = std::get_if<GridworldSpec>(&env))
        return {{"type", "gridworld"}, {"n", g->n}, {"noise", g->noise}, {"discount", g->discount}};
    const auto& o = std::get<ObjectworldSpec>(env);
    return {{"type", "objectworld"}, {"n", o.n},         {"n_colors", o.n_colors},
            {"n_objects", o.n_objects}, {"noise", o.noise}, {"discount", o.discount},
            {"seed", o.seed}};
}

inline EnvBundle build_environment(const std::variant<GridworldSpec, ObjectworldSpec>& env) {
    if (const auto* g = std::get_if<GridworldSpec>(&env)) return make_gridworld(*g);
    return make_objectworld(std::get<ObjectworldSpec>(env));
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
    if (!out) throw RuntimeFailure("write failed for " + path.string());
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeFailure("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline json read_json(const fs::path& path) {
    if (!fs::exists(path)) throw RuntimeFailure("missing input file " + path.string());
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw RuntimeFailure(path.string() + ": " + e.what());
    }
}

inline MdpDocument load_mdp(const fs::path& dir) {
    try {
        MdpDocument doc = mdp_from_json(read_json(dir / "mdp.json"));
        const ValidationReport report = validate_mdp(doc.mdp);
        if (!report.ok()) throw RuntimeFailure("mdp.json is not a valid MDP:\n" + report.summary());
        return doc;
    } catch (const FormatError& e) {
        throw RuntimeFailure(e.what());
    }
}

inline std::vector<Trajectory> load_trajectories(const fs::path& path) {
    if (!fs::exists(path)) throw RuntimeFailure("missing input file " + path.string());
    std::ifstream in(path, std::ios::binary);
    try {
        return read_trajectories(in);
    } catch (const FormatError& e) {
        throw RuntimeFailure(e.what());
    }
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace detail

inline void cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
    const EnvBundle bundle = build_environment(cfg.environment);
    detail::ensure_dir(cfg.output_dir);
    detail::write_text(cfg.output_dir / "mdp.json", detail::dump(mdp_to_json(bundle.mdp, bundle.features)));
    detail::write_text(cfg.output_dir / "truth.json",
                       detail::dump(truth_to_json(bundle, environment_to_json(cfg.environment))));
    log << "generated n_states=" << bundle.mdp.n_states() << " n_actions=" << bundle.mdp.n_actions()
        << " d=" << bundle.features.dim() << '\n';
}

inline void cmd_sample(const ExperimentConfig& cfg, std::ostream& log) {
    MdpDocument doc = detail::load_mdp(cfg.output_dir);
    const json truth = detail::read_json(cfg.output_dir / "truth.json");
    Vector reward;
    try {
        reward = reward_from_json(truth, "true_reward");
    } catch (const FormatError& e) {
        throw RuntimeFailure(std::string("truth.json: ") + e.what());
    }
    if (static_cast<std::size_t>(reward.size()) != doc.mdp.n_states())
        throw RuntimeFailure("truth.json: true_reward length does not match the MDP");
    EnvBundle bundle{std::move(doc.mdp), std::move(doc.features), std::nullopt, std::move(reward), 0, {}};
    const auto trajectories = sample_trajectories(bundle, cfg.trajectory.count, cfg.trajectory.length,
                                                  cfg.trajectory.seed);
    std::ostringstream out;
    write_trajectories(out, trajectories);
    detail::write_text(cfg.output_dir / "trajectories.jsonl", out.str());
    log << "sampled " << trajectories.size() << " trajectories of length " << cfg.trajectory.length
        << '\n';
}

inline void cmd_learn(const ExperimentConfig& cfg, std::ostream& log) {
    const MdpDocument doc = detail::load_mdp(cfg.output_dir);
    const auto trajectories = detail::load_trajectories(cfg.output_dir / "trajectories.jsonl");
    if (trajectories.empty()) throw RuntimeFailure("trajectories.jsonl holds no trajectories");
    const LearnConfig learn = cfg.learn_config();

    LearnResult result;
    try {
        result = learn_reward(doc.mdp, doc.features, trajectories, learn);
    } catch (const ConvergenceError& e) {
        throw RuntimeFailure(e.what());
    } catch (const std::invalid_argument& e) {
        throw RuntimeFailure(e.what());
    }

    json restarts = json::array();
    std::ostringstream trace;
    CsvWriter csv(trace, {"restart", "epoch", "log_likelihood"});
    for (std::size_t i = 0; i < result.per_restart.size(); ++i) {
        const auto& r = result.per_restart[i];
        json entry{{"restart", i}, {"failed", r.failed}};
        if (r.failed) {
            entry["failure"] = r.failure;
        } else {
            entry["final_log_likelihood"] = r.log_likelihood;
            entry["theta"] = bgi::detail::vector_to_json(r.theta);
        }
        restarts.push_back(std::move(entry));
        for (std::size_t e = 0; e < r.trace.size(); ++e)
            csv.row({std::to_string(i), std::to_string(e), csv_number(r.trace[e])});
    }
    const Vector learned = reward_vector(doc.features, result.best_theta);
    const json out{{"best_theta", bgi::detail::vector_to_json(result.best_theta.theta())},
                   {"best_log_likelihood", result.best_log_likelihood},
                   {"best_restart", result.best_restart},
                   {"learned_reward", bgi::detail::vector_to_json(learned)},
                   {"method", to_string(cfg.smoothing.method)},
                   {"k", cfg.smoothing.k},
                   {"b", cfg.motion.b},
                   {"restarts", std::move(restarts)}};
    detail::write_text(cfg.output_dir / "learned.json", detail::dump(out));
    detail::write_text(cfg.output_dir / "trace.csv", trace.str());
    log << "best log-likelihood " << result.best_log_likelihood << " (restart " << result.best_restart
        << ")\n";
}

inline std::vector<double> default_k_grid(SmoothingMethod method) {
    return method == SmoothingMethod::PNorm ? std::vector<double>{30, 100, 500, 1000}
                                            : std::vector<double>{1, 5, 20, 100};
}

/**
Evaluates a learned reward against the truth. `learned_path` may point at a
learn output (learned_reward) or at any document with a true_reward field.
The gap curve and action statistics use the true reward; in p-norm mode it is
shifted to be non-negative first.
*/
inline EvalReport cmd_eval(const ExperimentConfig& cfg, const std::optional<fs::path>& learned_path,
                           std::ostream& log) {
    PhaseTimer timer;
    const MdpDocument doc = detail::load_mdp(cfg.output_dir);
    const json truth = detail::read_json(cfg.output_dir / "truth.json");
    const json learned_doc = detail::read_json(learned_path.value_or(cfg.output_dir / "learned.json"));
    Vector true_reward;
    Vector learned;
    try {
        true_reward = reward_from_json(truth, "true_reward");
        learned = learned_doc.contains("learned_reward") ? reward_from_json(learned_doc, "learned_reward")
                                                         : reward_from_json(learned_doc, "true_reward");
    } catch (const FormatError& e) {
        throw RuntimeFailure(e.what());
    }
    if (true_reward.size() != learned.size() ||
        static_cast<std::size_t>(true_reward.size()) != doc.mdp.n_states())
        throw RuntimeFailure("learned and true reward lengths do not match the MDP");

    EvalReport report;
    try {
        report.pearson_corr = timer.time("correlation", [&] { return pearson_corr(learned, true_reward); });

        Vector r = true_reward;
        if (cfg.smoothing.method == SmoothingMethod::PNorm && r.minCoeff() < 0.0)
            r.array() -= r.minCoeff();
        const SolveResult exact = timer.time("exact_solve", [&] {
            return exact_value_iteration(doc.mdp, r, cfg.smoothing.threshold, cfg.smoothing.max_iterations);
        });
        const SolveResult approx =
            timer.time("approx_solve", [&] { return approx_value_iteration(doc.mdp, r, cfg.smoothing); });
        if (!exact.converged || !approx.converged) throw RuntimeFailure("value solve did not converge");

        const ActionStats at_b = optimal_action_stats(exact.q, approx.q, cfg.motion.b);
        report.opt_action_prob_min = at_b.min;
        report.opt_action_prob_max = at_b.max;
        report.opt_action_prob_mean = at_b.mean;
        for (double b : cfg.eval.b_grid)
            report.b_sweep.push_back({b, optimal_action_stats(exact.q, approx.q, b)});

        const auto k_grid = cfg.eval.k_grid.empty() ? default_k_grid(cfg.smoothing.method) : cfg.eval.k_grid;
        report.gap_curve = timer.time(
            "gap_curve", [&] { return approximation_gap(doc.mdp, r, cfg.smoothing.method, k_grid); });
    } catch (const ConvergenceError& e) {
        throw RuntimeFailure(e.what());
    } catch (const std::domain_error& e) {
        throw RuntimeFailure(e.what());
    }
    report.timing = timer.seconds();

    // Timings stay out of the files so reruns are byte-identical.
    EvalReport persisted = report;
    persisted.timing.clear();
    detail::write_text(cfg.output_dir / "eval.json", detail::dump(eval_report_to_json(persisted)));
    std::ostringstream gap;
    CsvWriter gap_csv(gap, {"k", "gap"});
    for (const auto& p : report.gap_curve) gap_csv.row({csv_number(p.k), csv_number(p.gap)});
    detail::write_text(cfg.output_dir / "gap_curve.csv", gap.str());
    std::ostringstream stats;
    CsvWriter stats_csv(stats, {"b", "min", "max", "mean"});
    for (const auto& p : report.b_sweep)
        stats_csv.row({csv_number(p.b), csv_number(p.stats.min), csv_number(p.stats.max),
                       csv_number(p.stats.mean)});
    detail::write_text(cfg.output_dir / "action_stats.csv", stats.str());
    log << "correlation " << report.pearson_corr << ", mean optimal-action probability "
        << report.opt_action_prob_mean << " at b=" << cfg.motion.b << '\n';
    return report;
}

struct BenchRow {
    std::size_t state_size;
    SmoothingMethod method;
    double seconds;  // NaN when the measurement failed
    std::string error;
};

/// Mean wall-clock seconds of one gradient-ascent iteration on an objectworld of `size` states.
inline double time_iteration(const EnvBundle& bundle, const std::vector<Trajectory>& trajectories,
                             const LearnConfig& learn, double min_seconds) {
    Vector theta = initial_theta(learn, bundle.features.dim(), 0);
    using clock = std::chrono::steady_clock;
    std::size_t reps = 0;
    const auto start = clock::now();
    double elapsed = 0.0;
    do {
        const PipelineResult step = evaluate_pipeline(bundle.mdp, bundle.features, theta, trajectories,
                                                      learn.smoothing, learn.motion, learn.gradient, true);
        theta += learn.learning_rate * step.gradient;
        ++reps;
        elapsed = std::chrono::duration<double>(clock::now() - start).count();
    } while (elapsed < min_seconds);
    return elapsed / static_cast<double>(reps);
}

inline std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg, bool large, std::ostream& log) {
    std::vector<std::size_t> sizes = cfg.bench.sizes;
    if (large)
        for (std::size_t extra : {std::size_t{6400}, std::size_t{14400}})
            if (std::find(sizes.begin(), sizes.end(), extra) == sizes.end()) sizes.push_back(extra);

    std::vector<BenchRow> rows;
    for (std::size_t size : sizes) {
        const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(size))));
        ObjectworldSpec spec;
        spec.n = n;
        spec.n_colors = cfg.bench.n_colors;
        spec.n_objects = std::min(cfg.bench.n_objects, size);
        spec.seed = cfg.bench.seed;
        std::optional<EnvBundle> bundle;
        std::vector<Trajectory> trajectories;
        std::string setup_error;
        try {
            bundle.emplace(make_objectworld(spec));
            trajectories = sample_trajectories(*bundle, cfg.bench.trajectories, cfg.bench.length, cfg.bench.seed);
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        for (SmoothingMethod method : {SmoothingMethod::PNorm, SmoothingMethod::GSoft}) {
            BenchRow row{size, method, std::nan(""), setup_error};
            if (setup_error.empty()) {
                LearnConfig learn = cfg.learn_config();
                learn.rng_seed = cfg.bench.seed;
                learn.smoothing.method = method;
                learn.smoothing.k = method == SmoothingMethod::PNorm ? cfg.bench.pnorm_k : cfg.bench.gsoft_k;
                try {
                    row.seconds = time_iteration(*bundle, trajectories, learn, cfg.bench.min_seconds);
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
            }
            log << "bench states=" << size << " method=" << to_string(method) << ' ';
            if (row.error.empty())
                log << "seconds=" << row.seconds << '\n';
            else
                log << "failed: " << row.error << '\n';
            rows.push_back(row);
        }
    }
    detail::ensure_dir(cfg.output_dir);
    std::ostringstream out;
    CsvWriter csv(out, {"state_size", "method", "seconds"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.state_size), std::string(to_string(r.method)),
                 r.error.empty() ? csv_number(r.seconds) : "nan"});
    detail::write_text(cfg.output_dir / "bench.csv", out.str());
    return rows;
}

}  // namespace bgi::cli
