#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "bnit/bayes_net.hpp"
#include "bnit/bounds.hpp"
#include "bnit/dense.hpp"
#include "bnit/error.hpp"
#include "bnit/farness.hpp"
#include "bnit/testers.hpp"

namespace bnit {

using json = nlohmann::ordered_json;

inline json to_json(const BayesNet& net) {
    json j;
    j["n"] = net.n();
    j["order"] = net.order();
    j["parents"] = net.parents();
    j["cpt"] = net.cpt();
    return j;
}

inline json to_json(const DenseDistribution& P) {
    json j;
    j["n"] = P.n();
    j["mass"] = P.mass();
    return j;
}

inline json to_json(const ProductDistribution& P) { return json{{"p", P.p()}}; }

inline json to_json(const TestReport& r) {
    json j;
    j["verdict"] = verdict_name(r.verdict);
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["witness_subset"] = r.witness_subset ? json(*r.witness_subset) : json(nullptr);
    j["samples_used"] = r.samples_used;
    return j;
}

inline json to_json(const FarnessCertificate& c) {
    json j;
    j["tv_to_prod_marginals"] = c.tv_to_prod_marginals;
    j["certified_lower_bound"] = c.certified_lower_bound;
    j["empirical_min_tv"] = c.empirical_min_tv;
    j["minimizer"] = c.minimizer.p();
    return j;
}

inline json to_json(const BoundCheckResult& r) {
    json j;
    j["name"] = r.name;
    j["grid_points"] = r.grid_points;
    j["violations"] = r.violations;
    j["max_violation"] = std::isfinite(r.max_violation) ? json(r.max_violation) : json(nullptr);
    j["regime_note"] = r.regime_note;
    return j;
}

namespace detail {

template <class T>
T get_field(const nlohmann::ordered_json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw Error(Errc::ParseError, std::string("missing field \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("field \"") + key + "\": " + e.what());
    }
}

} // namespace detail

inline BayesNet bayes_net_from_json(const json& j) {
    return BayesNet(detail::get_field<std::size_t>(j, "n"), detail::get_field<std::vector<std::size_t>>(j, "order"),
                    detail::get_field<std::vector<IndexSet>>(j, "parents"), detail::get_field<std::vector<std::vector<double>>>(j, "cpt"));
}

inline DenseDistribution dense_from_json(const json& j) {
    return DenseDistribution(detail::get_field<std::size_t>(j, "n"), detail::get_field<std::vector<double>>(j, "mass"));
}

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path);
}

} // namespace bnit
