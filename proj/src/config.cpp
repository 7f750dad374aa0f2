#include "tbd/config.hpp"

#include "tbd/io.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace tbd {

namespace {

std::vector<double> parse_list(std::string_view text) {
    std::vector<double> out;
    for (auto item : split(text, ',')) out.push_back(parse_double(item));
    return out;
}

std::pair<Vec2, Vec2> parse_box(std::string_view text) {
    const auto v = parse_list(text);
    if (v.size() != 4) throw std::invalid_argument("expected xmin,ymin,xmax,ymax");
    return {Vec2(v[0], v[1]), Vec2(v[2], v[3])};
}

std::string format_box(const Vec2& lo, const Vec2& hi) {
    return format_double(lo.x()) + "," + format_double(lo.y()) + "," + format_double(hi.x()) + "," +
           format_double(hi.y());
}

std::size_t parse_count(std::string_view text) {
    const auto v = parse_int(text);
    if (v < 0) throw std::invalid_argument("expected a non-negative integer");
    return static_cast<std::size_t>(v);
}

int parse_step(std::string_view text) {
    const auto t = trim(text);
    if (t == "inf" || t == "never") return kNeverDies;
    const auto v = parse_int(t);
    if (v < 0 || v >= kNeverDies) throw std::invalid_argument("step out of range");
    return static_cast<int>(v);
}

std::string format_steps(const std::vector<int>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out += ",";
        out += steps[i] == kNeverDies ? "inf" : std::to_string(steps[i]);
    }
    return out;
}

std::vector<int> parse_steps(std::string_view text) {
    std::vector<int> out;
    if (trim(text).empty()) return out;
    for (auto item : split(text, ',')) out.push_back(parse_step(item));
    return out;
}

template <typename T, typename Parse>
std::optional<T> parse_optional(std::string_view text, std::string_view none_word, Parse&& parse) {
    if (trim(text) == none_word) return std::nullopt;
    return parse(text);
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) { return format_double(v); }

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        // scenario
        k.push_back({"scenario.roi",
                     [](RunConfig& c, std::string_view v) { std::tie(c.scenario.roi_min, c.scenario.roi_max) = parse_box(v); },
                     [](const RunConfig& c) { return format_box(c.scenario.roi_min, c.scenario.roi_max); }});
        k.push_back({"scenario.grid_rows", [](RunConfig& c, std::string_view v) { c.scenario.grid_rows = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.scenario.grid_rows); }});
        k.push_back({"scenario.grid_cols", [](RunConfig& c, std::string_view v) { c.scenario.grid_cols = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.scenario.grid_cols); }});
        k.push_back({"scenario.steps", [](RunConfig& c, std::string_view v) { c.scenario.steps = parse_step(v); },
                     [](const RunConfig& c) { return std::to_string(c.scenario.steps); }});
        k.push_back({"scenario.object_count",
                     [](RunConfig& c, std::string_view v) { c.scenario.object_count = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.scenario.object_count); }});
        k.push_back({"scenario.birth_steps",
                     [](RunConfig& c, std::string_view v) { c.scenario.birth_steps = parse_steps(v); },
                     [](const RunConfig& c) { return format_steps(c.scenario.birth_steps); }});
        k.push_back({"scenario.death_steps",
                     [](RunConfig& c, std::string_view v) { c.scenario.death_steps = parse_steps(v); },
                     [](const RunConfig& c) { return format_steps(c.scenario.death_steps); }});
        k.push_back({"scenario.spawn_box",
                     [](RunConfig& c, std::string_view v) {
                         std::tie(c.scenario.spawn_min, c.scenario.spawn_max) = parse_box(v);
                     },
                     [](const RunConfig& c) { return format_box(c.scenario.spawn_min, c.scenario.spawn_max); }});
        k.push_back({"scenario.gamma0", [](RunConfig& c, std::string_view v) { c.scenario.gamma0 = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.scenario.gamma0); }});
        k.push_back({"scenario.init_velocity_var",
                     [](RunConfig& c, std::string_view v) { c.scenario.init_velocity_var = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.scenario.init_velocity_var); }});
        k.push_back({"scenario.layout_seed",
                     [](RunConfig& c, std::string_view v) {
                         c.scenario.layout_seed = parse_optional<std::uint64_t>(v, "none", parse_u64);
                     },
                     [](const RunConfig& c) {
                         return c.scenario.layout_seed ? std::to_string(*c.scenario.layout_seed) : std::string("none");
                     }});
        // sensor
        k.push_back({"psf.sigma_s_sq", [](RunConfig& c, std::string_view v) { c.scenario.sigma_s_sq = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.scenario.sigma_s_sq); }});
        k.push_back({"psf.sigma_eps_sq",
                     [](RunConfig& c, std::string_view v) { c.scenario.sigma_eps_sq = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.scenario.sigma_eps_sq); }});
        // motion (shared by the simulator and the tracker)
        k.push_back({"motion.q_pv", [](RunConfig& c, std::string_view v) { c.scenario.q_pv = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.scenario.q_pv); }});
        k.push_back({"motion.q_gamma", [](RunConfig& c, std::string_view v) { c.scenario.q_gamma = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.scenario.q_gamma); }});
        k.push_back({"motion.survival", [](RunConfig& c, std::string_view v) { c.survival = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.survival); }});
        // birth
        k.push_back({"birth.p_birth", [](RunConfig& c, std::string_view v) { c.birth.p_birth = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.birth.p_birth); }});
        k.push_back({"birth.rate",
                     [](RunConfig& c, std::string_view v) { c.birth.rate = parse_optional<double>(v, "none", parse_double); },
                     [](const RunConfig& c) { return c.birth.rate ? fmt(*c.birth.rate) : std::string("none"); }});
        k.push_back({"birth.gamma_max",
                     [](RunConfig& c, std::string_view v) {
                         c.birth.gamma_max = parse_optional<double>(v, "auto", parse_double);
                     },
                     [](const RunConfig& c) { return c.birth.gamma_max ? fmt(*c.birth.gamma_max) : std::string("auto"); }});
        k.push_back({"birth.v_var", [](RunConfig& c, std::string_view v) { c.birth.v_var = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.birth.v_var); }});
        k.push_back({"birth.detect_threshold",
                     [](RunConfig& c, std::string_view v) {
                         c.birth.detect_threshold = parse_optional<double>(v, "auto", parse_double);
                     },
                     [](const RunConfig& c) {
                         return c.birth.detect_threshold ? fmt(*c.birth.detect_threshold) : std::string("auto");
                     }});
        // engine
        k.push_back({"engine.iterations", [](RunConfig& c, std::string_view v) { c.engine.iterations = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.engine.iterations); }});
        k.push_back({"engine.particles",
                     [](RunConfig& c, std::string_view v) { c.engine.particles_per_po = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.engine.particles_per_po); }});
        k.push_back({"engine.declare_threshold",
                     [](RunConfig& c, std::string_view v) { c.engine.declare_threshold = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.engine.declare_threshold); }});
        k.push_back({"engine.prune_threshold",
                     [](RunConfig& c, std::string_view v) { c.engine.prune_threshold = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.engine.prune_threshold); }});
        k.push_back({"engine.gate_radius",
                     [](RunConfig& c, std::string_view v) {
                         const auto t = trim(v);
                         if (t == "auto") {
                             c.engine.gate = GateRadius{};
                         } else if (t == "none") {
                             c.engine.gate = GateRadius::disabled();
                         } else {
                             c.engine.gate = GateRadius::fixed(parse_double(t));
                         }
                     },
                     [](const RunConfig& c) {
                         switch (c.engine.gate.mode) {
                             case GateRadius::Mode::automatic: return std::string("auto");
                             case GateRadius::Mode::disabled: return std::string("none");
                             case GateRadius::Mode::fixed: break;
                         }
                         return fmt(c.engine.gate.meters);
                     }});
        k.push_back({"engine.max_pos",
                     [](RunConfig& c, std::string_view v) {
                         c.engine.max_pos = parse_optional<std::size_t>(v, "none", parse_count);
                     },
                     [](const RunConfig& c) {
                         return c.engine.max_pos ? std::to_string(*c.engine.max_pos) : std::string("none");
                     }});
        // metric
        k.push_back({"gospa.cutoff", [](RunConfig& c, std::string_view v) { c.gospa.cutoff = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.gospa.cutoff); }});
        k.push_back({"gospa.order", [](RunConfig& c, std::string_view v) { c.gospa.order = parse_double(v); },
                     [](const RunConfig& c) { return fmt(c.gospa.order); }});
        // run
        k.push_back({"run.runs", [](RunConfig& c, std::string_view v) { c.runs = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.runs); }});
        k.push_back({"run.base_seed", [](RunConfig& c, std::string_view v) { c.base_seed = parse_u64(v); },
                     [](const RunConfig& c) { return std::to_string(c.base_seed); }});
        k.push_back({"run.output_dir", [](RunConfig& c, std::string_view v) { c.output_dir = std::string(trim(v)); },
                     [](const RunConfig& c) { return c.output_dir; }});
        k.push_back({"run.threads", [](RunConfig& c, std::string_view v) { c.threads = parse_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.threads); }});
        return k;
    }();
    return keys;
}

const Key* find_key(std::string_view name) {
    for (const auto& k : key_table()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

}  // namespace

Models RunConfig::models() const {
    Models m;
    m.motion = scenario.truth_motion();
    m.motion.survival = survival;
    m.psf = scenario.psf();
    m.birth.p_birth = birth.rate ? birth_prob_from_rate(*birth.rate) : birth.p_birth;
    m.birth.gamma_max = birth.gamma_max.value_or(2.0 * scenario.gamma0);
    m.birth.v_var = birth.v_var;
    m.birth.detect_threshold = birth.detect_threshold.value_or(
        BirthModel::default_threshold(scenario.gamma0, scenario.sigma_s_sq, scenario.sigma_eps_sq));
    return m;
}

void RunConfig::validate() const {
    std::vector<std::string> problems;
    const auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.emplace_back(e.what());
        }
    };
    check([&] { scenario.validate(); });
    check([&] {
        if (!(survival >= 0.0 && survival <= 1.0)) throw ConfigInvalid("motion.survival must lie in [0, 1]");
    });
    check([&] {
        if (!(birth.p_birth >= 0.0 && birth.p_birth < 1.0)) throw ConfigInvalid("birth.p_birth must lie in [0, 1)");
    });
    check([&] {
        if (birth.rate && !(*birth.rate >= 0.0)) throw ConfigInvalid("birth.rate must be >= 0");
    });
    if (problems.empty()) {
        check([&] {
            const Models m = models();
            m.motion.validate();
            m.psf.validate();
            m.birth.validate();
        });
    }
    check([&] { engine.validate(); });
    check([&] { gospa.validate(); });
    if (runs < 1) problems.emplace_back("run.runs must be >= 1");
    if (threads < 1) problems.emplace_back("run.threads must be >= 1");
    if (output_dir.empty()) problems.emplace_back("run.output_dir must not be empty");
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigInvalid(msg);
    }
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    const Key* k = find_key(trim(key));
    if (!k) throw ConfigInvalid("unknown key '" + std::string(trim(key)) + "'");
    try {
        k->set(cfg, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigInvalid(std::string(trim(key)) + ": " + e.what());
    }
}

RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::vector<std::string> problems;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        try {
            set_config_value(cfg, body.substr(0, eq), body.substr(eq + 1));
        } catch (const ConfigInvalid& e) {
            problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigInvalid(msg);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigInvalid("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : key_table()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
}

}  // namespace tbd
