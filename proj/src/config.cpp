#include "dgm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dgm/errors.hpp"
#include "dgm/io.hpp"

namespace dgm {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
    const std::string_view t = trim(v);
    if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    const double x = parse_double(t);
    if (std::isnan(x)) throw std::invalid_argument("nan is not allowed");
    return x;
}

std::uint64_t to_u64(std::string_view v) {
    const std::string_view t = trim(v);
    std::uint64_t x = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(t) + "'");
    return x;
}

std::size_t to_count(std::string_view v) { return static_cast<std::size_t>(to_u64(v)); }

bool to_bool(std::string_view v) {
    const std::string_view t = trim(v);
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + std::string(t) + "'");
}

Vector to_list(std::string_view v) {
    Vector out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        out.push_back(to_double(v.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string one_of(std::string_view v, std::initializer_list<std::string_view> allowed) {
    const std::string_view t = trim(v);
    for (auto a : allowed)
        if (t == a) return std::string(t);
    std::string msg = "expected one of";
    for (auto a : allowed) msg += " " + std::string(a);
    throw std::invalid_argument(msg + ", got '" + std::string(t) + "'");
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"model.name",
         [](ExperimentConfig& c, std::string_view v) {
             c.model.name = one_of(v, {"lotka-volterra", "linear-gaussian", "circle", "toy1d"});
         }},
        {"model.n_steps", [](ExperimentConfig& c, std::string_view v) { c.model.lotka_volterra.n_steps = to_count(v); }},
        {"model.dt_sim", [](ExperimentConfig& c, std::string_view v) { c.model.lotka_volterra.dt_sim = to_double(v); }},
        {"model.y0",
         [](ExperimentConfig& c, std::string_view v) {
             const Vector y = to_list(v);
             if (y.size() != 2) throw std::invalid_argument("y0 needs two values");
             c.model.lotka_volterra.y0 = {y[0], y[1]};
         }},
        {"model.prior_mu", [](ExperimentConfig& c, std::string_view v) { c.model.lotka_volterra.prior_mu = to_double(v); }},
        {"model.prior_sigma",
         [](ExperimentConfig& c, std::string_view v) { c.model.lotka_volterra.prior_sigma = to_double(v); }},
        {"model.weights", [](ExperimentConfig& c, std::string_view v) { c.model.weights = to_list(v); }},
        {"model.radius", [](ExperimentConfig& c, std::string_view v) { c.model.radius = to_double(v); }},
        {"method.name",
         [](ExperimentConfig& c, std::string_view v) {
             c.method = one_of(v, {"chmc", "abc-reject", "abc-mcmc", "abc-input", "abc-slice"});
         }},
        {"sampler.dt", [](ExperimentConfig& c, std::string_view v) { c.sampler.dt = to_double(v); }},
        {"sampler.n_steps", [](ExperimentConfig& c, std::string_view v) { c.sampler.n_steps = to_count(v); }},
        {"sampler.n_geodesic", [](ExperimentConfig& c, std::string_view v) { c.sampler.n_geodesic = to_count(v); }},
        {"sampler.eps_proj", [](ExperimentConfig& c, std::string_view v) { c.sampler.eps_proj = to_double(v); }},
        {"sampler.max_newton_iters",
         [](ExperimentConfig& c, std::string_view v) { c.sampler.max_newton_iters = to_count(v); }},
        {"sampler.max_fallback_iters",
         [](ExperimentConfig& c, std::string_view v) { c.sampler.max_fallback_iters = to_count(v); }},
        {"sampler.reverse_check", [](ExperimentConfig& c, std::string_view v) { c.sampler.reverse_check = to_bool(v); }},
        {"abc.kernel",
         [](ExperimentConfig& c, std::string_view v) {
             c.abc.kernel.kind = one_of(v, {"uniform", "gaussian"}) == "uniform" ? AbcKernel::Kind::uniform_ball
                                                                                  : AbcKernel::Kind::gaussian;
         }},
        {"abc.epsilon", [](ExperimentConfig& c, std::string_view v) { c.abc.kernel.epsilon = to_double(v); }},
        {"abc.proposal_scale", [](ExperimentConfig& c, std::string_view v) { c.abc.proposal_scale = to_double(v); }},
        {"abc.budget", [](ExperimentConfig& c, std::string_view v) { c.abc.budget = to_count(v); }},
        {"run.n_samples", [](ExperimentConfig& c, std::string_view v) { c.n_samples = to_count(v); }},
        {"run.burn_in", [](ExperimentConfig& c, std::string_view v) { c.burn_in = to_count(v); }},
        {"run.seed", [](ExperimentConfig& c, std::string_view v) { c.seed = to_u64(v); }},
        {"run.observation",
         [](ExperimentConfig& c, std::string_view v) {
             c.observation = std::string(trim(v));
             if (c.observation.empty()) throw std::invalid_argument("observation must not be empty");
         }},
        {"run.output_dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(trim(v)); }},
        {"run.truth", [](ExperimentConfig& c, std::string_view v) { c.truth = to_list(v); }},
    };
    return table;
}

int line_of(const ExperimentConfig& c, const std::string& key) {
    const auto it = c.lines.find(key);
    return it == c.lines.end() ? 0 : it->second;
}

bool is_simulated(const std::string& observation) { return observation.rfind("simulate:", 0) == 0; }

}  // namespace

bool is_chmc(const ExperimentConfig& cfg) { return cfg.method == "chmc"; }

GeneratorModel build_model(const ModelConfig& cfg) {
    if (cfg.name == "lotka-volterra") return lotka_volterra_model(cfg.lotka_volterra);
    if (cfg.name == "linear-gaussian") return linear_gaussian_model(cfg.weights);
    if (cfg.name == "circle") return circle_model(cfg.radius);
    if (cfg.name == "toy1d") return toy1d_model();
    throw std::invalid_argument("unknown model '" + cfg.name + "'");
}

void ExperimentConfig::validate() const {
    auto check = [&](const std::string& where, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what(), line_of(*this, where));
        }
    };
    check("model", [&] { build_model(model).validate(); });
    if (is_chmc(*this)) check("sampler", [&] { sampler.validate(); });
    else check("abc", [&] { abc.validate(); });
    if (n_samples < 1 && method != "abc-reject") throw ConfigError("n_samples must be >= 1", line_of(*this, "run.n_samples"));
    if (is_simulated(observation)) {
        try {
            to_u64(std::string_view(observation).substr(9));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("observation: ") + e.what(), line_of(*this, "run.observation"));
        }
    }
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section != "model" && section != "method" && section != "sampler" && section != "abc" &&
                section != "run")
                throw ConfigError("unknown section [" + section + "]", line_no);
            cfg.lines.emplace(section, line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw ConfigError("missing key before '='", line_no);
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line_no);
        const std::string full = section + "." + key;
        const auto it = setters().find(full);
        if (it == setters().end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no);
        if (!cfg.lines.emplace(full, line_no).second)
            throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line_no);
        try {
            it->second(cfg, line.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(full + ": " + e.what(), line_no);
        }
    }
    if (!is_simulated(cfg.observation)) {
        std::filesystem::path p(cfg.observation);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.observation = p.lexically_normal().string();
    }
    if (cfg.output_dir.is_relative() && !base_dir.empty()) cfg.output_dir = (base_dir / cfg.output_dir).lexically_normal();
    cfg.validate();
    if (!is_simulated(cfg.observation) && !std::filesystem::exists(cfg.observation))
        throw ConfigError("observation file not found: " + cfg.observation, line_of(cfg, "run.observation"));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

}  // namespace dgm
