#include "dgm/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <ostream>
#include <thread>

#include "dgm/abc.hpp"
#include "dgm/errors.hpp"
#include "dgm/io.hpp"
#include "dgm/random.hpp"

namespace dgm {

namespace {

bool is_simulated(const std::string& observation) { return observation.rfind("simulate:", 0) == 0; }

int line_of(const ExperimentConfig& c, const std::string& key) {
    const auto it = c.lines.find(key);
    return it == c.lines.end() ? 0 : it->second;
}

std::string fmt(double x) { return format_double(x); }

void write_named_values(const std::filesystem::path& path, const std::vector<std::string>& names,
                        const Vector& values) {
    CsvTable t;
    t.header = {"parameter", "value"};
    for (std::size_t i = 0; i < values.size(); ++i) t.rows.push_back({names[i], fmt(values[i])});
    write_csv(path, t);
}

std::vector<std::string> input_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("u" + std::to_string(i + 1));
    return names;
}

struct Summary {
    double mean = 0.0;
    double stderr_ = 0.0;
};

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return s;
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(xs.size() - 1);
    s.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

// Maps library exceptions to exit codes; `body` returns the success code.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const InitializationFailed& e) {
        err << "initialization failed: " << e.what() << '\n';
        return exit_code::initialization_failed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
}

void print_summary(std::ostream& out, const InferResult& r) {
    out << r.chain.method << ": " << r.chain.size() << " samples, accept rate " << fmt(r.stats.accept_rate) << '\n';
    for (std::size_t k = 0; k < r.stats.names.size(); ++k) {
        out << "  " << r.stats.names[k] << " = " << fmt(r.stats.mean[k]) << " +- " << fmt(r.stats.stderr_[k])
            << " (ess " << fmt(r.stats.ess[k]) << ")";
        if (r.truth) out << " truth " << fmt((*r.truth)[k]);
        out << '\n';
    }
}

}  // namespace

SimulatedData simulate_data(const ModelConfig& cfg, std::uint64_t seed) {
    const GeneratorModel model = build_model(cfg);
    SimulatedData d;
    d.obs.label = "simulate:" + std::to_string(seed);
    Rng rng(seed);
    if (cfg.name == "circle") {
        d.obs.values = {cfg.radius * cfg.radius};
        return d;
    }
    if (cfg.name == "lotka-volterra") {
        const Vector noise = rng.normal_vector(2 * cfg.lotka_volterra.n_steps);
        d.u = lotka_volterra_inputs(cfg.lotka_volterra, lotka_volterra_reference_params, noise);
    } else {
        d.u = model.base.sample(rng);
    }
    d.z = model.g_z(d.u);
    d.obs.values = model.g_y(d.u);
    return d;
}

ResolvedObservation resolve_observation(const ExperimentConfig& cfg, const GeneratorModel& model) {
    ResolvedObservation r;
    const int line = line_of(cfg, "run.observation");
    if (is_simulated(cfg.observation)) {
        const std::uint64_t seed = std::stoull(cfg.observation.substr(9));
        SimulatedData d = simulate_data(cfg.model, seed);
        r.obs = std::move(d.obs);
        if (!d.z.empty()) r.truth = std::move(d.z);
    } else {
        try {
            r.obs = read_observation(cfg.observation);
        } catch (const std::exception& e) {
            throw ConfigError(e.what(), line);
        }
    }
    if (r.obs.values.size() != model.observed_dim)
        throw ConfigError("observation has " + std::to_string(r.obs.values.size()) + " values, model " + model.name +
                              " expects " + std::to_string(model.observed_dim),
                          line);
    if (cfg.truth) r.truth = cfg.truth;
    if (r.truth && r.truth->size() != model.latent_names.size())
        throw ConfigError("truth has " + std::to_string(r.truth->size()) + " values, model has " +
                              std::to_string(model.latent_names.size()) + " parameters",
                          line_of(cfg, cfg.truth ? "run.truth" : "run.observation"));
    return r;
}

SampleChain run_method(const ExperimentConfig& cfg, const GeneratorModel& model, const Observation& obs,
                       std::uint64_t seed) {
    if (is_chmc(cfg)) {
        SamplerConfig sc = cfg.sampler;
        sc.seed = seed;
        Rng rng(seed);
        return run_chain(model, obs, sc, cfg.n_samples, cfg.burn_in, rng);
    }
    AbcConfig ac = cfg.abc;
    ac.seed = seed;
    if (cfg.method == "abc-reject") return abc_reject(model, obs, ac);
    if (cfg.method == "abc-mcmc") return abc_mcmc(model, obs, ac, cfg.n_samples, cfg.burn_in);
    if (cfg.method == "abc-input") return abc_input_space_mcmc(model, obs, ac, cfg.n_samples, cfg.burn_in);
    if (cfg.method == "abc-slice") return abc_slice_mcmc(model, obs, ac, cfg.n_samples, cfg.burn_in);
    throw ConfigError("unknown method '" + cfg.method + "'", line_of(cfg, "method.name"));
}

InferResult run_infer(const ExperimentConfig& cfg) {
    const GeneratorModel model = build_model(cfg.model);
    ResolvedObservation ro = resolve_observation(cfg, model);
    InferResult r;
    r.chain = run_method(cfg, model, ro.obs, cfg.seed);
    r.stats = chain_stats(r.chain, model.latent_names);
    r.truth = std::move(ro.truth);
    return r;
}

void write_infer_outputs(const std::filesystem::path& dir, const InferResult& r) {
    std::filesystem::create_directories(dir);
    const auto& names = r.stats.names;
    const bool weighted = !r.chain.weights.empty();

    CsvTable chain;
    chain.header = {"index"};
    chain.header.insert(chain.header.end(), names.begin(), names.end());
    chain.header.insert(chain.header.end(), {"accepted", "delta_h"});
    if (weighted) chain.header.push_back("weight");
    for (std::size_t i = 0; i < r.chain.size(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (double v : r.chain.z[i]) row.push_back(fmt(v));
        row.push_back(r.chain.records[i].accepted ? "1" : "0");
        row.push_back(fmt(r.chain.records[i].delta_h));
        if (weighted) row.push_back(fmt(r.chain.weights[i]));
        chain.rows.push_back(std::move(row));
    }
    write_csv(dir / "chain.csv", chain);

    CsvTable stats;
    stats.header = {"parameter", "mean", "stderr", "ess", "degenerate", "accept_rate", "n_samples"};
    if (r.truth) stats.header.insert(stats.header.end(), {"truth", "abs_error"});
    for (std::size_t k = 0; k < names.size(); ++k) {
        std::vector<std::string> row{names[k],
                                     fmt(r.stats.mean[k]),
                                     fmt(r.stats.stderr_[k]),
                                     fmt(r.stats.ess[k]),
                                     r.stats.degenerate[k] ? "1" : "0",
                                     fmt(r.stats.accept_rate),
                                     std::to_string(r.stats.n_samples)};
        if (r.truth) {
            row.push_back(fmt((*r.truth)[k]));
            row.push_back(fmt(std::abs(r.stats.mean[k] - (*r.truth)[k])));
        }
        stats.rows.push_back(std::move(row));
    }
    write_csv(dir / "stats.csv", stats);

    std::filesystem::remove(dir / "rmse.csv");
    if (r.truth && r.chain.size() > 0 && !weighted) {
        const auto sizes = default_prefix_sizes(r.chain.size());
        CsvTable rmse;
        rmse.header = {"n_samples", "rmse"};
        for (const RmsePoint& p : posterior_rmse(r.chain.z, *r.truth, sizes))
            rmse.rows.push_back({std::to_string(p.n), fmt(p.rmse)});
        write_csv(dir / "rmse.csv", rmse);
    }

    CsvTable timing;
    timing.header = {"parameter", "wall_seconds", "ess_per_sec"};
    for (std::size_t k = 0; k < names.size(); ++k)
        timing.rows.push_back({names[k], fmt(r.stats.wall_seconds), fmt(r.stats.ess_per_sec[k])});
    write_csv(dir / "timing.csv", timing);
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err) {
    if (opts.steps && *opts.steps == 0) {
        err << "usage error: --steps must be >= 1\n";
        return exit_code::usage;
    }
    return guarded(err, [&] {
        ModelConfig mc;
        if (opts.config) mc = load_config(*opts.config).model;
        else mc.name = opts.model;
        if (opts.steps) mc.lotka_volterra.n_steps = *opts.steps;
        if (mc.name != "lotka-volterra" && mc.name != "linear-gaussian" && mc.name != "circle" && mc.name != "toy1d") {
            err << "usage error: unknown model '" << mc.name << "'\n";
            return exit_code::usage;
        }
        const GeneratorModel model = build_model(mc);
        const SimulatedData d = simulate_data(mc, opts.seed);
        const auto& dir = opts.output_dir;
        std::filesystem::create_directories(dir);
        if (mc.name == "lotka-volterra") write_trajectory(dir / "observation.csv", d.obs.values);
        else write_observation_values(dir / "observation.csv", d.obs.values);
        if (!d.u.empty()) {
            write_named_values(dir / "truth_u.csv", input_names(d.u.size()), d.u);
            write_named_values(dir / "truth_z.csv", model.latent_names, d.z);
        }
        out << "model " << model.name << ", seed " << opts.seed << ", " << d.obs.values.size() << " observed values\n";
        for (std::size_t k = 0; k < d.z.size(); ++k) {
            out << "  " << model.latent_names[k] << " = " << fmt(d.z[k]);
            if (mc.name == "lotka-volterra") out << " (rate " << fmt(std::exp(d.z[k])) << ")";
            out << '\n';
        }
        out << "wrote " << dir.string() << '\n';
        return exit_code::ok;
    });
}

int cmd_infer(const InferOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        ExperimentConfig cfg = load_config(opts.config);
        if (opts.seed) cfg.seed = *opts.seed;
        if (opts.output_dir) cfg.output_dir = *opts.output_dir;
        const InferResult r = run_infer(cfg);
        if (zero_acceptance(r.chain)) {
            err << "zero acceptance: " << r.chain.method << " accepted none of " << r.chain.attempts << " proposals\n";
            return exit_code::zero_acceptance;
        }
        write_infer_outputs(cfg.output_dir, r);
        print_summary(out, r);
        out << "wrote " << cfg.output_dir.string() << '\n';
        return exit_code::ok;
    });
}

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
    if (opts.configs.size() < 2) {
        err << "usage error: compare needs at least two configs\n";
        return exit_code::usage;
    }
    if (opts.runs < 1 || opts.jobs < 1) {
        err << "usage error: --runs and --jobs must be >= 1\n";
        return exit_code::usage;
    }
    return guarded(err, [&] {
        std::vector<ExperimentConfig> cfgs;
        for (const auto& p : opts.configs) cfgs.push_back(load_config(p));
        const GeneratorModel model = build_model(cfgs.front().model);
        std::vector<ResolvedObservation> observations;
        for (std::size_t c = 0; c < cfgs.size(); ++c) {
            if (!(cfgs[c].model == cfgs.front().model))
                throw ConfigError("model in " + opts.configs[c].string() + " differs from " +
                                      opts.configs.front().string(),
                                  line_of(cfgs[c], "model"));
            observations.push_back(resolve_observation(cfgs[c], model));
            if (observations[c].obs.values != observations.front().obs.values)
                throw ConfigError("observation in " + opts.configs[c].string() + " differs from " +
                                      opts.configs.front().string(),
                                  line_of(cfgs[c], "run.observation"));
        }

        std::map<std::string, int> method_count;
        for (const auto& c : cfgs) ++method_count[c.method];
        std::vector<std::string> labels;
        for (std::size_t c = 0; c < cfgs.size(); ++c)
            labels.push_back(method_count[cfgs[c].method] > 1 ? std::to_string(c + 1) + "-" + cfgs[c].method
                                                             : cfgs[c].method);

        const std::size_t n_tasks = cfgs.size() * opts.runs;
        std::vector<InferResult> results(n_tasks);
        std::vector<std::exception_ptr> errors(n_tasks);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t t = next++; t < n_tasks; t = next++) {
                const std::size_t c = t / opts.runs;
                const std::size_t r = t % opts.runs;
                try {
                    const std::uint64_t seed = opts.seed.value_or(cfgs[c].seed) + r;
                    InferResult res;
                    res.chain = run_method(cfgs[c], model, observations[c].obs, seed);
                    res.stats = chain_stats(res.chain, model.latent_names);
                    res.truth = observations[c].truth;
                    write_infer_outputs(opts.output_dir / labels[c] / ("run_" + std::to_string(r)), res);
                    // Only the summaries are merged; drop the samples early.
                    res.chain.u = {};
                    res.chain.p = {};
                    res.chain.z = {};
                    results[t] = std::move(res);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t j = 1; j < std::min(opts.jobs, n_tasks); ++j) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);

        CsvTable merged;
        merged.header = {"method", "parameter", "runs", "ess_mean", "ess_stderr", "accept_rate_mean"};
        CsvTable timing;
        timing.header = {"method", "parameter", "runs", "ess_per_sec_mean", "ess_per_sec_stderr", "wall_seconds_mean"};
        for (std::size_t c = 0; c < cfgs.size(); ++c) {
            std::vector<double> accept;
            std::vector<double> wall;
            for (std::size_t r = 0; r < opts.runs; ++r) {
                accept.push_back(results[c * opts.runs + r].stats.accept_rate);
                wall.push_back(results[c * opts.runs + r].stats.wall_seconds);
            }
            for (std::size_t k = 0; k < model.latent_names.size(); ++k) {
                std::vector<double> ess;
                std::vector<double> eps;
                for (std::size_t r = 0; r < opts.runs; ++r) {
                    ess.push_back(results[c * opts.runs + r].stats.ess[k]);
                    eps.push_back(results[c * opts.runs + r].stats.ess_per_sec[k]);
                }
                const Summary se = summarize(ess);
                const Summary sp = summarize(eps);
                merged.rows.push_back({labels[c], model.latent_names[k], std::to_string(opts.runs), fmt(se.mean),
                                       fmt(se.stderr_), fmt(summarize(accept).mean)});
                timing.rows.push_back({labels[c], model.latent_names[k], std::to_string(opts.runs), fmt(sp.mean),
                                       fmt(sp.stderr_), fmt(summarize(wall).mean)});
                out << labels[c] << ' ' << model.latent_names[k] << ": ess/s " << fmt(sp.mean) << " +- "
                    << fmt(sp.stderr_) << ", ess " << fmt(se.mean) << '\n';
            }
        }
        write_csv(opts.output_dir / "compare.csv", merged);
        write_csv(opts.output_dir / "timing.csv", timing);
        out << "wrote " << opts.output_dir.string() << '\n';
        return exit_code::ok;
    });
}

}  // namespace dgm
