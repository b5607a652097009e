#include "nompcfar/errors.hpp"
#include "nompcfar/harness.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace nompcfar {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKnownKeys{
    {"experiment", {"name", "algorithm", "trials", "seed", "workers"}},
    {"scenario", {"dims", "k_targets", "snr_db", "min_sep_bins", "snapshots", "compression_ratio", "noise_fluct_db"}},
    {"detector",
     {"variant", "p_fa", "alpha", "n_ref", "n_guard", "os_rank", "exclusion_radius", "k_max", "max_iters", "sigma2"}},
    {"refine", {"newton_steps", "cyclic_rounds", "oversample", "step_accept_rule"}},
};

class Reader {
public:
    Reader(const pt::ptree& tree, std::string source) : tree_(tree), source_(std::move(source)) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key) const {
        auto sec = tree_.get_child_optional(section);
        if (!sec)
            return std::nullopt;
        auto v = sec->get_optional<std::string>(key);
        if (!v)
            return std::nullopt;
        return *v;
    }

    template <class T>
    std::optional<T> get(const std::string& section, const std::string& key) const {
        auto text = raw(section, key);
        if (!text)
            return std::nullopt;
        return parse<T>(*text, section, key);
    }

    template <class T>
    std::vector<T> list(const std::string& section, const std::string& key) const {
        std::vector<T> out;
        auto text = raw(section, key);
        if (!text)
            return out;
        std::string item;
        std::istringstream in(*text);
        while (std::getline(in, item, ','))
            out.push_back(parse<T>(item, section, key));
        return out;
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& why) const {
        throw ConfigError(source_ + ": [" + section + "] " + key + ": " + why);
    }

private:
    template <class T>
    T parse(const std::string& text, const std::string& section, const std::string& key) const {
        std::istringstream in(text);
        T value{};
        if constexpr (std::is_same_v<T, std::string>) {
            const auto first = text.find_first_not_of(" \t");
            const auto last = text.find_last_not_of(" \t");
            return first == std::string::npos ? std::string{} : text.substr(first, last - first + 1);
        } else if constexpr (std::is_same_v<T, bool>) {
            std::string word;
            in >> word;
            if (word == "true" || word == "1" || word == "yes")
                return true;
            if (word == "false" || word == "0" || word == "no")
                return false;
            fail(section, key, "expected a boolean, got '" + text + "'");
        } else if constexpr (std::is_unsigned_v<T>) {
            std::string word;
            in >> word;
            if (word.empty() || word.front() == '-')
                fail(section, key, "expected a non-negative integer, got '" + text + "'");
            std::istringstream num(word);
            num >> value;
            if (!num || !num.eof())
                fail(section, key, "expected a non-negative integer, got '" + text + "'");
            in >> std::ws;
        } else {
            in >> value;
            if (!in)
                fail(section, key, "cannot parse '" + text + "'");
            in >> std::ws;
        }
        if (!in.eof())
            fail(section, key, "trailing characters in '" + text + "'");
        return value;
    }

    const pt::ptree& tree_;
    std::string source_;
};

} // namespace

ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        auto known = kKnownKeys.find(section);
        if (known == kKnownKeys.end())
            throw ConfigError(source + ": unknown section [" + section + "]");
        if (body.empty() && !body.data().empty())
            throw ConfigError(source + ": key '" + section + "' outside any section");
        for (const auto& [key, value] : body)
            if (!known->second.count(key))
                throw ConfigError(source + ": [" + section + "] unknown key '" + key + "'");
    }

    const Reader r(tree, source);
    ExperimentConfig c;
    try {
        if (auto v = r.get<std::string>("experiment", "name"))
            c.name = *v;
        if (auto v = r.get<std::string>("experiment", "algorithm"))
            c.algorithm = parse_algorithm(*v);
        if (auto v = r.get<std::size_t>("experiment", "trials"))
            c.trials = *v;
        if (auto v = r.get<std::uint64_t>("experiment", "seed"))
            c.seed = *v;
        if (auto v = r.get<std::size_t>("experiment", "workers"))
            c.workers = *v;

        ScenarioSpec& s = c.scenario;
        if (auto dims = r.list<std::size_t>("scenario", "dims"); !dims.empty())
            s.dims = dims;
        if (auto v = r.get<std::size_t>("scenario", "k_targets"))
            s.k_targets = *v;
        if (auto snr = r.list<double>("scenario", "snr_db"); !snr.empty())
            s.snr_db = snr;
        if (auto v = r.get<double>("scenario", "min_sep_bins"))
            s.min_sep_bins = *v;
        if (auto v = r.get<std::size_t>("scenario", "snapshots"))
            s.snapshots = *v;
        if (auto text = r.raw("scenario", "compression_ratio"); text && *text != "none")
            s.compression_ratio = r.get<double>("scenario", "compression_ratio");
        if (auto v = r.get<double>("scenario", "noise_fluct_db"))
            s.noise_fluct_db = *v;

        NompCfarSettings& d = c.detector;
        if (auto v = r.get<std::string>("detector", "variant")) {
            try {
                d.cfar.variant = parse_variant(*v);
            } catch (const InvalidArgument& e) {
                r.fail("detector", "variant", e.what());
            }
        }
        if (auto v = r.get<double>("detector", "p_fa"))
            c.p_fa = *v;
        if (auto v = r.get<double>("detector", "alpha"))
            c.alpha = *v;
        if (auto v = r.get<std::size_t>("detector", "n_ref"))
            d.cfar.n_ref = *v;
        if (auto v = r.get<std::size_t>("detector", "n_guard"))
            d.cfar.n_guard = *v;
        if (auto v = r.get<std::size_t>("detector", "os_rank"))
            d.cfar.os_rank = *v;
        if (auto v = r.get<std::size_t>("detector", "exclusion_radius"))
            d.cfar.exclusion_radius = *v;
        if (auto v = r.get<double>("detector", "sigma2"))
            c.sigma2 = *v;
        // K_max defaults to twice the number of targets, or 32 for target-free scenes.
        d.k_max = s.k_targets > 0 ? 2 * s.k_targets : 32;
        if (auto v = r.get<std::size_t>("detector", "k_max"))
            d.k_max = *v;
        d.max_iters = std::max<std::size_t>(256, 8 * d.k_max);
        if (auto v = r.get<std::size_t>("detector", "max_iters"))
            d.max_iters = *v;

        RefineSettings& f = d.refine;
        if (auto v = r.get<std::size_t>("refine", "newton_steps"))
            f.newton_steps_single = *v;
        if (auto v = r.get<std::size_t>("refine", "cyclic_rounds"))
            f.cyclic_rounds = *v;
        if (auto v = r.get<std::size_t>("refine", "oversample"))
            f.oversample = *v;
        if (auto v = r.get<bool>("refine", "step_accept_rule"))
            f.step_accept_rule = *v;

        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse_experiment_config(in, path.string());
}

} // namespace nompcfar
