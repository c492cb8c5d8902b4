#include "fluidnet/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace fluidnet {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

using Section = std::map<std::string, std::string>;
using Tree = std::map<std::string, Section>;

Tree tokenize(const std::string& text) {
    Tree tree;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            }
            tree[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || section.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (tree[section].count(key) != 0) {
            throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
        }
        tree[section][key] = trim(line.substr(eq + 1));
    }
    return tree;
}

double to_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": not a number: '" + s + "'");
    }
}

long to_long(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": not an integer: '" + s + "'");
    }
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

Eigen::VectorXd to_vector(const std::string& s, const std::string& where) {
    const auto toks = split(s);
    Eigen::VectorXd v(toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) v(i) = to_double(toks[i], where);
    return v;
}

JobLaw to_job(const std::string& tok, const std::string& where) {
    if (tok == "zero") return JobLaw::zero();
    const auto colon = tok.find(':');
    if (colon != std::string::npos) {
        const std::string kind = tok.substr(0, colon);
        const double param = to_double(tok.substr(colon + 1), where);
        if (kind == "exp") return JobLaw::exponential(param);
        if (kind == "det") return JobLaw::deterministic(param);
    }
    throw ConfigError(where + ": bad job law '" + tok + "' (want exp:MU, det:C, or zero)");
}

// Access wrapper that records which keys were consumed so leftovers can be
// reported as config errors.
struct Reader {
    const Tree& tree;
    Tree consumed;

    const std::string* find(const std::string& sec, const std::string& key) {
        const auto s = tree.find(sec);
        if (s == tree.end()) return nullptr;
        const auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        consumed[sec][key] = k->second;
        return &k->second;
    }
    const std::string& require(const std::string& sec, const std::string& key) {
        const std::string* v = find(sec, key);
        if (v == nullptr) throw ConfigError("missing key '" + key + "' in [" + sec + "]");
        return *v;
    }
    void check_exhausted() const {
        for (const auto& [sec, keys] : tree) {
            const auto cs = consumed.find(sec);
            for (const auto& [key, value] : keys) {
                if (cs == consumed.end() || cs->second.count(key) == 0) {
                    throw ConfigError("unknown key '" + key + "' in [" + sec + "]");
                }
            }
        }
    }
};

void read_state(Reader& r, const std::string& sec, int nodes, double& lambda,
                std::vector<JobLaw>& jobs, Eigen::VectorXd& drain, Eigen::MatrixXd& routing) {
    lambda = to_double(r.require(sec, "lambda"), sec);
    jobs.clear();
    for (const auto& tok : split(r.require(sec, "jobs"))) jobs.push_back(to_job(tok, sec));
    if (static_cast<int>(jobs.size()) != nodes) {
        throw ConfigError("[" + sec + "] jobs: expected " + std::to_string(nodes) + " entries");
    }
    drain = to_vector(r.require(sec, "drain"), sec);
    if (drain.size() != nodes) {
        throw ConfigError("[" + sec + "] drain: expected " + std::to_string(nodes) + " entries");
    }
    const Eigen::VectorXd flat = to_vector(r.require(sec, "routing"), sec);
    if (flat.size() != nodes * nodes) {
        throw ConfigError("[" + sec + "] routing: expected " + std::to_string(nodes * nodes) +
                          " entries (row-major)");
    }
    routing = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(flat.data(), nodes, nodes);
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        if (i > 0) out += ' ';
        out += fmt(v(i));
    }
    return out;
}

std::string fmt_matrix(const Eigen::MatrixXd& m) {
    std::string out;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (i > 0 || j > 0) out += ' ';
            out += fmt(m(i, j));
        }
    }
    return out;
}

std::string fmt_jobs(const std::vector<JobLaw>& jobs) {
    std::string out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (i > 0) out += ' ';
        switch (jobs[i].kind) {
            case JobLaw::Kind::exponential: out += "exp:" + fmt(jobs[i].param); break;
            case JobLaw::Kind::deterministic: out += "det:" + fmt(jobs[i].param); break;
            case JobLaw::Kind::zero: out += "zero"; break;
        }
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    const Tree tree = tokenize(text);
    Reader r{tree, {}};
    ExperimentConfig cfg;

    const std::string* nodes_str = r.find("model", "nodes");
    const int nodes = nodes_str != nullptr ? static_cast<int>(to_long(*nodes_str, "model")) : 1;
    if (nodes < 1) throw ConfigError("[model] nodes must be >= 1");
    const double horizon = to_double(r.require("model", "horizon"), "model");

    cfg.modulated = tree.count("modulation") != 0;
    if (cfg.modulated) {
        cfg.mod.nodes = nodes;
        cfg.mod.horizon = horizon;
        cfg.mod.num_states = static_cast<int>(to_long(r.require("modulation", "states"), "modulation"));
        if (cfg.mod.num_states < 1) throw ConfigError("[modulation] states must be >= 1");
        const int d = cfg.mod.num_states;
        const Eigen::VectorXd flat = to_vector(r.require("modulation", "generator"), "modulation");
        if (flat.size() != d * d) {
            throw ConfigError("[modulation] generator: expected " + std::to_string(d * d) +
                              " entries (row-major)");
        }
        cfg.mod.generator =
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>(flat.data(), d, d);
        cfg.mod.initial_state =
            static_cast<int>(to_long(r.require("modulation", "initial"), "modulation")) - 1;
        if (cfg.mod.initial_state < 0 || cfg.mod.initial_state >= d) {
            throw ConfigError("[modulation] initial: state out of range");
        }
        cfg.mod.states.resize(d);
        for (int j = 0; j < d; ++j) {
            const std::string sec = "state " + std::to_string(j + 1);
            if (tree.count(sec) == 0) throw ConfigError("missing section [" + sec + "]");
            auto& st = cfg.mod.states[j];
            read_state(r, sec, nodes, st.lambda, st.jobs, st.drain, st.routing);
        }
    } else {
        cfg.network.nodes = nodes;
        cfg.network.horizon = horizon;
        read_state(r, "model", nodes, cfg.network.lambda, cfg.network.jobs, cfg.network.drain,
                   cfg.network.routing);
    }

    if (tree.count("target") != 0) {
        cfg.has_target = true;
        cfg.a = to_vector(r.require("target", "a"), "target");
        if (cfg.a.size() != nodes) {
            throw ConfigError("[target] a: expected " + std::to_string(nodes) + " entries");
        }
        if (const std::string* nv = r.find("target", "n")) {
            for (const auto& tok : split(*nv)) {
                const long n = to_long(tok, "target");
                if (n < 1) throw ConfigError("[target] n values must be >= 1");
                cfg.n_values.push_back(static_cast<int>(n));
            }
        }
    }

    if (const std::string* v = r.find("stopping", "eps")) cfg.stopping.eps = to_double(*v, "stopping");
    if (const std::string* v = r.find("stopping", "critical_value")) {
        cfg.stopping.critical_value = to_double(*v, "stopping");
    }
    if (const std::string* v = r.find("stopping", "batch")) cfg.stopping.batch = to_long(*v, "stopping");
    if (const std::string* v = r.find("stopping", "min_runs")) {
        cfg.stopping.min_runs = to_long(*v, "stopping");
    }
    if (const std::string* v = r.find("stopping", "max_runs")) {
        cfg.stopping.max_runs = to_long(*v, "stopping");
    }
    if (cfg.stopping.eps <= 0.0 || cfg.stopping.critical_value <= 0.0 ||
        cfg.stopping.batch < 1 || cfg.stopping.min_runs < 1 || cfg.stopping.max_runs < 1) {
        throw ConfigError("[stopping] values must be positive");
    }

    if (tree.count("moments") != 0) {
        cfg.has_moments = true;
        cfg.x0 = Eigen::VectorXd::Zero(nodes);
        if (const std::string* v = r.find("moments", "x0")) {
            cfg.x0 = to_vector(*v, "moments");
            if (cfg.x0.size() != nodes) {
                throw ConfigError("[moments] x0: expected " + std::to_string(nodes) + " entries");
            }
        }
        if (const std::string* v = r.find("moments", "tmax")) {
            cfg.moments_tmax = to_double(*v, "moments");
        }
        if (const std::string* v = r.find("moments", "points")) {
            cfg.moments_points = static_cast<int>(to_long(*v, "moments"));
        }
        if (cfg.moments_tmax <= 0.0 || cfg.moments_points < 2) {
            throw ConfigError("[moments] tmax must be > 0 and points >= 2");
        }
    }

    if (const std::string* v = r.find("decay", "runs")) cfg.decay_runs = to_long(*v, "decay");
    if (cfg.decay_runs < 1) throw ConfigError("[decay] runs must be >= 1");
    if (const std::string* v = r.find("density", "points")) {
        cfg.density_points = static_cast<int>(to_long(*v, "density"));
    }
    if (cfg.density_points < 2) throw ConfigError("[density] points must be >= 2");

    if (const std::string* v = r.find("run", "seed")) {
        cfg.has_seed = true;
        try {
            std::size_t pos = 0;
            cfg.seed = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument(*v);
        } catch (const std::exception&) {
            throw ConfigError("[run] seed: not an unsigned integer: '" + *v + "'");
        }
    }

    r.check_exhausted();

    const auto problems = cfg.modulated ? validate(cfg.mod) : validate(cfg.network);
    if (!problems.empty()) {
        std::string msg = "invalid model:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

ModulatedNetworkSpec ExperimentConfig::as_modulated() const {
    return modulated ? mod : ModulatedNetworkSpec::from_network(network);
}

std::string echo_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    const int nodes = cfg.modulated ? cfg.mod.nodes : cfg.network.nodes;
    const double horizon = cfg.modulated ? cfg.mod.horizon : cfg.network.horizon;
    out << "[model]\n";
    out << "nodes = " << nodes << "\n";
    out << "horizon = " << fmt(horizon) << "\n";
    if (!cfg.modulated) {
        out << "lambda = " << fmt(cfg.network.lambda) << "\n";
        out << "jobs = " << fmt_jobs(cfg.network.jobs) << "\n";
        out << "drain = " << fmt_vector(cfg.network.drain) << "\n";
        out << "routing = " << fmt_matrix(cfg.network.routing) << "\n";
    } else {
        out << "\n[modulation]\n";
        out << "states = " << cfg.mod.num_states << "\n";
        out << "generator = " << fmt_matrix(cfg.mod.generator) << "\n";
        out << "initial = " << cfg.mod.initial_state + 1 << "\n";
        for (int j = 0; j < cfg.mod.num_states; ++j) {
            const auto& st = cfg.mod.states[j];
            out << "\n[state " << j + 1 << "]\n";
            out << "lambda = " << fmt(st.lambda) << "\n";
            out << "jobs = " << fmt_jobs(st.jobs) << "\n";
            out << "drain = " << fmt_vector(st.drain) << "\n";
            out << "routing = " << fmt_matrix(st.routing) << "\n";
        }
    }
    if (cfg.has_target) {
        out << "\n[target]\n";
        out << "a = " << fmt_vector(cfg.a) << "\n";
        if (!cfg.n_values.empty()) {
            out << "n =";
            for (int n : cfg.n_values) out << ' ' << n;
            out << "\n";
        }
    }
    out << "\n[stopping]\n";
    out << "eps = " << fmt(cfg.stopping.eps) << "\n";
    out << "critical_value = " << fmt(cfg.stopping.critical_value) << "\n";
    out << "batch = " << cfg.stopping.batch << "\n";
    out << "min_runs = " << cfg.stopping.min_runs << "\n";
    out << "max_runs = " << cfg.stopping.max_runs << "\n";
    if (cfg.has_moments) {
        out << "\n[moments]\n";
        out << "x0 = " << fmt_vector(cfg.x0) << "\n";
        out << "tmax = " << fmt(cfg.moments_tmax) << "\n";
        out << "points = " << cfg.moments_points << "\n";
    }
    out << "\n[decay]\n";
    out << "runs = " << cfg.decay_runs << "\n";
    out << "\n[density]\n";
    out << "points = " << cfg.density_points << "\n";
    if (cfg.has_seed) {
        out << "\n[run]\n";
        out << "seed = " << cfg.seed << "\n";
    }
    return out.str();
}

std::string config_header(const ExperimentConfig& cfg, const std::string& version) {
    std::ostringstream out;
    out << "# version = " << version << "\n";
    std::istringstream in(echo_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        out << "# " << line << "\n";
    }
    return out.str();
}

}  // namespace fluidnet
