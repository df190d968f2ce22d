#include "marc/config.hpp"

#include "marc/error.hpp"
#include "marc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace marc {

using nlohmann::json;

std::string_view to_string(Profile p) { return p == Profile::paper ? "paper" : "smoke"; }

Profile profile_from_string(std::string_view name) {
    if (name == "paper") return Profile::paper;
    if (name == "smoke") return Profile::smoke;
    throw ConfigError("unknown profile '" + std::string(name) + "' (expected paper or smoke)");
}

std::string ExperimentConfig::metric() const { return system.family == Family::lorenz63 ? "valid_time" : "mse"; }

std::uint64_t stage_seed(const ExperimentConfig& c, std::string_view stage, std::uint64_t index) {
    return derive_seed(c.seed, stage, index);
}

void apply_derived_fields(ExperimentConfig& c) {
    c.system.rng_seed = stage_seed(c, "library");
    c.reservoir.seed = stage_seed(c, "topology");
    c.reservoir.input_dim = c.system.observation_dim();
    c.autoencoder.seed = stage_seed(c, "autoencoder");
    c.search.seed = stage_seed(c, "search");
    if (c.system.sampling.points >= 2) c.training.dt = c.system.sampling.dt();
}

ExperimentConfig paper_profile(Family family) {
    ExperimentConfig c;
    c.profile = Profile::paper;
    c.experiment = std::string(to_string(family));
    switch (family) {
        case Family::sine:
        case Family::multimodal:
            c.system = family == Family::sine ? SystemSpec::sine_default() : SystemSpec::multimodal_default();
            c.reservoir.nodes = 1000;
            c.reservoir.mean_degree = 100.0;
            c.reservoir.spectral_radius = 1.0;
            c.reservoir.input_scale = 1.0;
            c.reservoir.bias_scale = 1.5;
            c.reservoir.time_constant = 1.0;
            c.training.alpha = 5e-6;
            c.training.warmup = 1.0;
            c.autoencoder.hidden = {200, 200};
            c.autoencoder.latent_dim = family == Family::sine ? 4 : 7;
            c.test.count = family == Family::sine ? 100 : 200;
            c.test.mode = SampleMode::random_times;
            break;
        case Family::lorenz63:
            c.system = SystemSpec::lorenz_default();
            c.reservoir.nodes = 1000;
            c.reservoir.mean_degree = 100.0;
            c.reservoir.spectral_radius = 0.8;
            c.reservoir.input_scale = 0.05;
            c.reservoir.bias_scale = 0.5;
            c.reservoir.time_constant = 1.0;
            c.training.alpha = 5e-4;
            c.training.warmup = 10.0;
            c.autoencoder.hidden = {600, 200};
            c.autoencoder.latent_dim = 7;
            c.test.count = 20;
            c.test.mode = SampleMode::sequential;
            c.baseline.enabled = true;
            break;
    }
    c.test.observations = 10;
    apply_derived_fields(c);
    return c;
}

ExperimentConfig smoke_profile(Family family) {
    ExperimentConfig c = paper_profile(family);
    c.profile = Profile::smoke;
    c.reservoir.nodes = 200;
    c.reservoir.mean_degree = 20.0;
    c.autoencoder.hidden = {64, 32};
    c.autoencoder.learning_rate = 1e-3;
    c.autoencoder.epoch_cap = 4000;
    c.autoencoder.patience = 500;
    switch (family) {
        case Family::sine:
            c.system.sample_count = 100;
            c.test.count = 5;
            break;
        case Family::multimodal:
            c.system.sample_count = 100;
            c.test.count = 6;
            break;
        case Family::lorenz63:
            c.system.sample_count = 40;
            c.system.sampling.points = 2000;
            c.system.sampling.eval_end = 0.01 * 1999;
            c.test.count = 3;
            c.baseline.members = 3;
            c.baseline.continuation_points = 1000;
            break;
    }
    apply_derived_fields(c);
    return c;
}

ExperimentConfig make_profile(Profile profile, Family family) {
    return profile == Profile::paper ? paper_profile(family) : smoke_profile(family);
}

// --- JSON -------------------------------------------------------------------------

namespace {

json distribution_json(const Distribution& d) {
    return {{"kind", d.kind == Distribution::Kind::uniform ? "uniform" : "normal"}, {"a", d.a}, {"b", d.b}};
}

// Reads keys of one JSON object, rejecting unknown ones.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
    }
    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, _] : j_.items())
            if (!seen_.contains(key)) throw ConfigError("unknown key '" + path_ + "." + key + "'");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + path_ + "." + key + "': " + e.what());
        }
    }
    bool has(const char* key) const { return j_.contains(key); }
    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

json to_json(const ExperimentConfig& c) {
    json params = json::object();
    for (const auto& [name, d] : c.system.parameters) params[name] = distribution_json(d);
    const Sampling& s = c.system.sampling;
    json sampling{{"t_start", s.t_start},
                  {"points", s.points},
                  {"t_end", s.t_end ? json(*s.t_end) : json(nullptr)},
                  {"step", s.step ? json(*s.step) : json(nullptr)},
                  {"eval_start", s.eval_start},
                  {"eval_end", s.eval_end}};
    const auto& a = c.autoencoder;
    const auto& da = c.search.annealing;
    return json{
        {"experiment", c.experiment},
        {"profile", to_string(c.profile)},
        {"seed", c.seed},
        {"jobs", c.jobs},
        {"output_dir", c.output_dir},
        {"system",
         {{"family", to_string(c.system.family)},
          {"sample_count", c.system.sample_count},
          {"parameters", params},
          {"sampling", sampling},
          {"spin_up", c.system.spin_up}}},
        {"reservoir",
         {{"nodes", c.reservoir.nodes},
          {"mean_degree", c.reservoir.mean_degree},
          {"spectral_radius", c.reservoir.spectral_radius},
          {"input_scale", c.reservoir.input_scale},
          {"bias_scale", c.reservoir.bias_scale},
          {"time_constant", c.reservoir.time_constant}}},
        {"training", {{"alpha", c.training.alpha}, {"warmup", c.training.warmup}}},
        {"autoencoder",
         {{"hidden", a.hidden},
          {"latent_dim", a.latent_dim},
          {"learning_rate", a.learning_rate},
          {"beta1", a.beta1},
          {"beta2", a.beta2},
          {"epsilon", a.epsilon},
          {"validation_fraction", a.validation_fraction},
          {"patience", a.patience},
          {"epoch_cap", a.epoch_cap},
          {"batch_size", a.batch_size}}},
        {"search",
         {{"max_iterations", da.max_iterations},
          {"initial_temperature", da.initial_temperature},
          {"restart_temperature_ratio", da.restart_temperature_ratio},
          {"visit", da.visit},
          {"accept", da.accept},
          {"max_evaluations", da.max_evaluations},
          {"local_search", da.local_search},
          {"nelder_mead",
           {{"initial_scale", da.local.initial_scale},
            {"xtol", da.local.xtol},
            {"ftol", da.local.ftol},
            {"max_evaluations", da.local.max_evaluations}}},
          {"bound_expansion", c.search.bound_expansion},
          {"seed_candidates", c.search.seed_candidates}}},
        {"test", {{"count", c.test.count}, {"observations", c.test.observations}, {"mode", to_string(c.test.mode)}}},
        {"baseline",
         {{"enabled", c.baseline.enabled},
          {"members", c.baseline.members},
          {"continuation_points", c.baseline.continuation_points}}},
        {"valid_time", {{"lyapunov_time", c.valid_time.lyapunov_time}, {"per_component", c.valid_time.per_component}}},
    };
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
    Reader root(j, "config");
    root.get("experiment", c.experiment);
    std::string profile(to_string(c.profile));
    root.get("profile", profile);
    c.profile = profile_from_string(profile);
    root.get("seed", c.seed);
    root.get("jobs", c.jobs);
    root.get("output_dir", c.output_dir);

    if (const json* sys = root.child("system")) {
        Reader r(*sys, "system");
        std::string family(to_string(c.system.family));
        r.get("family", family);
        c.system.family = family_from_string(family);
        r.get("sample_count", c.system.sample_count);
        r.get("spin_up", c.system.spin_up);
        if (const json* params = r.child("parameters")) {
            if (!params->is_object()) throw ConfigError("system.parameters must be an object");
            for (const auto& [name, value] : params->items()) {
                Distribution d = c.system.parameters.contains(name) ? c.system.parameters.at(name) : Distribution{};
                Reader pr(value, "system.parameters." + name);
                std::string kind = d.kind == Distribution::Kind::uniform ? "uniform" : "normal";
                pr.get("kind", kind);
                if (kind == "uniform")
                    d.kind = Distribution::Kind::uniform;
                else if (kind == "normal")
                    d.kind = Distribution::Kind::normal;
                else
                    throw ConfigError("unknown distribution kind '" + kind + "'");
                pr.get("a", d.a);
                pr.get("b", d.b);
                c.system.parameters[name] = d;
            }
        }
        if (const json* smp = r.child("sampling")) {
            Reader sr(*smp, "system.sampling");
            Sampling& s = c.system.sampling;
            sr.get("t_start", s.t_start);
            sr.get("points", s.points);
            for (const char* key : {"t_end", "step"}) {
                std::optional<double>& field = std::string_view(key) == "t_end" ? s.t_end : s.step;
                if (const json* v = sr.child(key)) {
                    if (v->is_null())
                        field.reset();
                    else if (v->is_number())
                        field = v->get<double>();
                    else
                        throw ConfigError(std::string("system.sampling.") + key + " must be a number or null");
                }
            }
            sr.get("eval_start", s.eval_start);
            sr.get("eval_end", s.eval_end);
        }
    }
    if (const json* res = root.child("reservoir")) {
        Reader r(*res, "reservoir");
        r.get("nodes", c.reservoir.nodes);
        r.get("mean_degree", c.reservoir.mean_degree);
        r.get("spectral_radius", c.reservoir.spectral_radius);
        r.get("input_scale", c.reservoir.input_scale);
        r.get("bias_scale", c.reservoir.bias_scale);
        r.get("time_constant", c.reservoir.time_constant);
    }
    if (const json* tr = root.child("training")) {
        Reader r(*tr, "training");
        r.get("alpha", c.training.alpha);
        r.get("warmup", c.training.warmup);
    }
    if (const json* ae = root.child("autoencoder")) {
        Reader r(*ae, "autoencoder");
        auto& a = c.autoencoder;
        r.get("hidden", a.hidden);
        r.get("latent_dim", a.latent_dim);
        r.get("learning_rate", a.learning_rate);
        r.get("beta1", a.beta1);
        r.get("beta2", a.beta2);
        r.get("epsilon", a.epsilon);
        r.get("validation_fraction", a.validation_fraction);
        r.get("patience", a.patience);
        r.get("epoch_cap", a.epoch_cap);
        r.get("batch_size", a.batch_size);
    }
    if (const json* se = root.child("search")) {
        Reader r(*se, "search");
        auto& da = c.search.annealing;
        r.get("max_iterations", da.max_iterations);
        r.get("initial_temperature", da.initial_temperature);
        r.get("restart_temperature_ratio", da.restart_temperature_ratio);
        r.get("visit", da.visit);
        r.get("accept", da.accept);
        r.get("max_evaluations", da.max_evaluations);
        r.get("local_search", da.local_search);
        if (const json* nm = r.child("nelder_mead")) {
            Reader nr(*nm, "search.nelder_mead");
            nr.get("initial_scale", da.local.initial_scale);
            nr.get("xtol", da.local.xtol);
            nr.get("ftol", da.local.ftol);
            nr.get("max_evaluations", da.local.max_evaluations);
        }
        r.get("bound_expansion", c.search.bound_expansion);
        r.get("seed_candidates", c.search.seed_candidates);
    }
    if (const json* te = root.child("test")) {
        Reader r(*te, "test");
        r.get("count", c.test.count);
        r.get("observations", c.test.observations);
        std::string mode(to_string(c.test.mode));
        r.get("mode", mode);
        c.test.mode = sample_mode_from_string(mode);
    }
    if (const json* ba = root.child("baseline")) {
        Reader r(*ba, "baseline");
        r.get("enabled", c.baseline.enabled);
        r.get("members", c.baseline.members);
        r.get("continuation_points", c.baseline.continuation_points);
    }
    if (const json* vt = root.child("valid_time")) {
        Reader r(*vt, "valid_time");
        r.get("lyapunov_time", c.valid_time.lyapunov_time);
        r.get("per_component", c.valid_time.per_component);
    }
    apply_derived_fields(c);
    return c;
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    std::string experiment = j.value("experiment", std::string("sine"));
    if (j.contains("system") && j.at("system").contains("family"))
        experiment = j.at("system").at("family").get<std::string>();
    const Profile profile = profile_from_string(j.value("profile", std::string("paper")));
    return config_from_json(j, make_profile(profile, family_from_string(experiment)));
}

// --- Validation -------------------------------------------------------------------

Diagnostics validate_config(const ExperimentConfig& c) {
    Diagnostics d;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            d.errors.emplace_back(e.what());
        }
    };
    check([&] { c.system.validate(); });
    check([&] { c.reservoir.validate(); });
    check([&] { c.training.validate(); });
    check([&] { c.autoencoder.validate(); });
    check([&] { c.search.validate(); });
    check([&] { c.valid_time.validate(); });

    try {
        if (family_from_string(c.experiment) != c.system.family)
            d.errors.push_back("experiment '" + c.experiment + "' does not match system family '" +
                               std::string(to_string(c.system.family)) + "'");
    } catch (const Error& e) {
        d.errors.emplace_back(e.what());
    }
    if (c.jobs < 1) d.errors.emplace_back("jobs must be at least 1");
    if (c.test.count < 1) d.errors.emplace_back("test.count must be at least 1");
    if (c.test.observations < 2) d.errors.emplace_back("test.observations must be at least 2");
    if (c.system.sample_count < 10) d.errors.emplace_back("autoencoder training needs at least 10 library members");
    if (c.reservoir.input_dim != c.system.observation_dim())
        d.errors.emplace_back("reservoir input dimension differs from the observation dimension");
    if (c.system.sampling.points >= 2 && c.training.warmup_rows() + 2 > c.system.sampling.points)
        d.errors.emplace_back("warm-up leaves fewer than 2 training rows per library member");
    if (c.baseline.enabled) {
        if (c.system.family != Family::lorenz63) d.errors.emplace_back("baselines are defined for the Lorenz family only");
        if (c.baseline.members < 1 || c.baseline.members > c.system.sample_count)
            d.errors.emplace_back("baseline.members must lie in [1, sample_count]");
        if (c.baseline.continuation_points < 2) d.errors.emplace_back("baseline.continuation_points must be at least 2");
    }
    if (auto w = identifiability_warning(c.system, c.test.observations)) d.warnings.push_back(*w);
    return d;
}

}  // namespace marc
