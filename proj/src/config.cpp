#include "mohr/config.hpp"

#include <charconv>
#include <fstream>

namespace mohr {

TrainOptions RunConfig::train_options() const {
    TrainOptions o;
    o.k = k;
    o.score = score_options();
    o.rel_loss_on_scores = rel_loss_on_scores;
    o.sampler.per_action_positions = per_action_positions;
    o.skip_unweighted_batches = skip_unweighted_batches;
    o.eval_every = eval_every;
    o.patience = patience;
    o.eval_threads = threads;
    return o;
}

ScoreOptions RunConfig::score_options() const {
    ScoreOptions s;
    s.bias_in_mixture = bias_in_mixture;
    s.transition_mixture =
        variant != ModelVariant::no_mixture && variant != ModelVariant::single_task_no_mixture;
    return s;
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") {
        return true;
    }
    if (value == "off" || value == "false" || value == "0") {
        return false;
    }
    throw ConfigError("config key '" + key + "' expects on/off, got '" + value + "'");
}

template <typename T>
T parse_int(const std::string& key, const std::string& value) {
    T v{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
    }
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

}  // namespace

void apply_config_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "interactions") {
        c.interactions = value;
    } else if (key == "relations") {
        c.relations = value;
    } else if (key == "out") {
        c.out = value;
    } else if (key == "k") {
        c.k = parse_int<uint32_t>(key, value);
    } else if (key == "alpha") {
        c.hyper.alpha = parse_real(key, value);
    } else if (key == "beta") {
        c.hyper.beta = parse_real(key, value);
    } else if (key == "lambda") {
        c.hyper.lambda = parse_real(key, value);
    } else if (key == "learning_rate") {
        c.hyper.learning_rate = parse_real(key, value);
    } else if (key == "batch_size") {
        c.hyper.batch_size = parse_int<uint32_t>(key, value);
    } else if (key == "iterations") {
        c.hyper.iterations = parse_int<uint32_t>(key, value);
    } else if (key == "eval_negatives") {
        c.hyper.eval_negatives = parse_int<uint32_t>(key, value);
    } else if (key == "seed") {
        c.hyper.rng_seed = parse_int<uint64_t>(key, value);
    } else if (key == "threads") {
        c.threads = parse_int<int>(key, value);
    } else if (key == "bias_in_mixture") {
        c.bias_in_mixture = parse_bool(key, value);
    } else if (key == "rel_loss_on_scores") {
        c.rel_loss_on_scores = parse_bool(key, value);
    } else if (key == "filter_mode") {
        if (value == "fixpoint") {
            c.filter_mode = FilterMode::fixpoint;
        } else if (value == "single_pass") {
            c.filter_mode = FilterMode::single_pass;
        } else {
            throw ConfigError("filter_mode expects fixpoint|single_pass, got '" + value + "'");
        }
    } else if (key == "auc_mode") {
        if (value == "sampled") {
            c.auc_mode = AucMode::sampled;
        } else if (value == "full") {
            c.auc_mode = AucMode::full_scan;
        } else {
            throw ConfigError("auc_mode expects sampled|full, got '" + value + "'");
        }
    } else if (key == "position_sampling") {
        if (value == "per_user") {
            c.per_action_positions = false;
        } else if (value == "per_action") {
            c.per_action_positions = true;
        } else {
            throw ConfigError("position_sampling expects per_user|per_action, got '" + value + "'");
        }
    } else if (key == "skip_unweighted_batches") {
        c.skip_unweighted_batches = parse_bool(key, value);
    } else if (key == "variant") {
        c.variant = parse_variant(value);
    } else if (key == "eval_every") {
        c.eval_every = parse_int<uint32_t>(key, value);
    } else if (key == "patience") {
        c.patience = parse_int<uint32_t>(key, value);
    } else if (key == "relation_schema") {
        c.relation_schema.clear();
        size_t start = 0;
        while (start <= value.size()) {
            const size_t comma = value.find(',', start);
            const std::string name =
                trim(comma == std::string::npos ? value.substr(start) : value.substr(start, comma - start));
            if (!name.empty()) {
                c.relation_schema.push_back(name);
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
    } else {
        throw ConfigError("unknown config key: '" + key + "'");
    }
}

void merge_config_file(RunConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    std::string line;
    uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        const std::string stripped = trim(line);
        if (stripped.empty()) {
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + " is not key = value: " +
                              stripped);
        }
        apply_config_key(c, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    RunConfig c;
    merge_config_file(c, path);
    return c;
}

}  // namespace mohr
