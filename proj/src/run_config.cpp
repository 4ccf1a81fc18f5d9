#include "hsir/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hsir/errors.hpp"

namespace hsir {

std::string_view to_string(Task task) {
    switch (task) {
    case Task::denoise: return "denoise";
    case Task::complete: return "complete";
    case Task::sr: return "sr";
    }
    return "?";
}

Task parse_task(std::string_view text) {
    if (text == "denoise") return Task::denoise;
    if (text == "complete") return Task::complete;
    if (text == "sr") return Task::sr;
    throw ParseError("unknown task '" + std::string(text) + "'");
}

std::size_t default_steps(Task task) { return task == Task::complete ? 3000 : 1000; }

bool RunConfig::operator==(const RunConfig& o) const {
    return task == o.task && sigma == o.sigma && rate == o.rate && scale == o.scale && steps == o.steps &&
           start_step == o.start_step && eta == o.eta && eta_b == o.eta_b && beta_1 == o.beta_1 &&
           beta_T == o.beta_T && sigma_convention == o.sigma_convention && unit_scale == o.unit_scale &&
           endmembers == o.endmembers && lr == o.lr && iters_per_step == o.iters_per_step &&
           adam_beta1 == o.adam_beta1 && adam_beta2 == o.adam_beta2 && adam_eps == o.adam_eps && seed == o.seed;
}

void RunConfig::adopt_task(Task t) {
    task = t;
    if (!explicit_keys.count("T")) steps = default_steps(t);
    if (!explicit_keys.count("t0")) start_step = steps / 2;
    if (!explicit_keys.count("lr") && start_step > 0 && iters_per_step > 0) {
        lr = default_learning_rate(start_step, iters_per_step);
    }
}

void RunConfig::validate() const { sampler_config().validate(); }

SamplerConfig RunConfig::sampler_config() const {
    SamplerConfig cfg;
    cfg.steps = steps;
    cfg.start_step = start_step;
    cfg.eta = eta;
    cfg.eta_b = eta_b;
    cfg.sigma_y = 2.0 * sigma;
    cfg.beta_1 = beta_1;
    cfg.beta_T = beta_T;
    cfg.sigma_convention = sigma_convention;
    cfg.unit_scale = unit_scale;
    cfg.endmembers = endmembers;
    cfg.fit.learning_rate = lr;
    cfg.fit.iters_per_step = iters_per_step;
    cfg.fit.adam_beta1 = adam_beta1;
    cfg.fit.adam_beta2 = adam_beta2;
    cfg.fit.adam_eps = adam_eps;
    cfg.seed = seed;
    return cfg;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParseError("config: key " + std::string(key) + " has invalid value '" + std::string(value) + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ParseError("config: key " + std::string(key) + " expects true/false, got '" + std::string(value) + "'");
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"task", [](RunConfig& c, auto, auto v) { c.task = parse_task(v); }},
        {"sigma", [](RunConfig& c, auto k, auto v) { c.sigma = parse_number<double>(k, v); }},
        {"rate", [](RunConfig& c, auto k, auto v) { c.rate = parse_number<double>(k, v); }},
        {"scale", [](RunConfig& c, auto k, auto v) { c.scale = parse_number<std::size_t>(k, v); }},
        {"T", [](RunConfig& c, auto k, auto v) { c.steps = parse_number<std::size_t>(k, v); }},
        {"t0", [](RunConfig& c, auto k, auto v) { c.start_step = parse_number<std::size_t>(k, v); }},
        {"eta", [](RunConfig& c, auto k, auto v) { c.eta = parse_number<double>(k, v); }},
        {"eta_b", [](RunConfig& c, auto k, auto v) { c.eta_b = parse_number<double>(k, v); }},
        {"beta_1", [](RunConfig& c, auto k, auto v) { c.beta_1 = parse_number<double>(k, v); }},
        {"beta_T", [](RunConfig& c, auto k, auto v) { c.beta_T = parse_number<double>(k, v); }},
        {"sigma_convention", [](RunConfig& c, auto, auto v) { c.sigma_convention = parse_sigma_convention(v); }},
        {"unit_scale", [](RunConfig& c, auto k, auto v) { c.unit_scale = parse_bool(k, v); }},
        {"R", [](RunConfig& c, auto k, auto v) { c.endmembers = parse_number<std::size_t>(k, v); }},
        {"lr", [](RunConfig& c, auto k, auto v) { c.lr = parse_number<double>(k, v); }},
        {"iters_per_step", [](RunConfig& c, auto k, auto v) { c.iters_per_step = parse_number<std::size_t>(k, v); }},
        {"adam_beta1", [](RunConfig& c, auto k, auto v) { c.adam_beta1 = parse_number<double>(k, v); }},
        {"adam_beta2", [](RunConfig& c, auto k, auto v) { c.adam_beta2 = parse_number<double>(k, v); }},
        {"adam_eps", [](RunConfig& c, auto k, auto v) { c.adam_eps = parse_number<double>(k, v); }},
        {"seed", [](RunConfig& c, auto k, auto v) { c.seed = parse_number<std::uint64_t>(k, v); }},
    };
    return table;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
        if (!cfg.explicit_keys.insert(std::string(key)).second) {
            throw ParseError("config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        }
        it->second(cfg, key, value);
    }
    cfg.adopt_task(cfg.task);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

std::string format_run_config(const RunConfig& c) {
    std::ostringstream out;
    out << "task=" << to_string(c.task) << '\n'
        << "sigma=" << format_double(c.sigma) << '\n'
        << "rate=" << format_double(c.rate) << '\n'
        << "scale=" << c.scale << '\n'
        << "T=" << c.steps << '\n'
        << "t0=" << c.start_step << '\n'
        << "eta=" << format_double(c.eta) << '\n'
        << "eta_b=" << format_double(c.eta_b) << '\n'
        << "beta_1=" << format_double(c.beta_1) << '\n'
        << "beta_T=" << format_double(c.beta_T) << '\n'
        << "sigma_convention=" << to_string(c.sigma_convention) << '\n'
        << "unit_scale=" << (c.unit_scale ? "true" : "false") << '\n'
        << "R=" << c.endmembers << '\n'
        << "lr=" << format_double(c.lr) << '\n'
        << "iters_per_step=" << c.iters_per_step << '\n'
        << "adam_beta1=" << format_double(c.adam_beta1) << '\n'
        << "adam_beta2=" << format_double(c.adam_beta2) << '\n'
        << "adam_eps=" << format_double(c.adam_eps) << '\n'
        << "seed=" << c.seed << '\n';
    return out.str();
}

} // namespace hsir
