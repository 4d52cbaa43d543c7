#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bnit/bayes_net.hpp"
#include "bnit/dense.hpp"
#include "bnit/error.hpp"
#include "bnit/instances.hpp"
#include "bnit/io.hpp"
#include "bnit/rng.hpp"
#include "bnit/testers.hpp"

namespace bnit {

enum class Family { product, mixture_trees, mixture_products, paninski };

inline const char* family_name(Family f) {
    switch (f) {
    case Family::product: return "product";
    case Family::mixture_trees: return "mixture_trees";
    case Family::mixture_products: return "mixture_products";
    case Family::paninski: return "paninski";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    for (Family f : {Family::product, Family::mixture_trees, Family::mixture_products, Family::paninski})
        if (s == family_name(f)) return f;
    throw Error(Errc::ParseError, "unknown family \"" + s + "\"");
}

struct InstanceSpec {
    Family family = Family::product;
    std::size_t n = 0, d = 0;
    double eps = 0.0;
    RngState rng{};
    double C = 2.0;
    OddChildPolicy odd = OddChildPolicy::leave_unmatched;
};

struct Instance {
    InstanceSpec spec;
    std::optional<BayesNet> net;
    std::optional<DenseDistribution> dense;
    json params;
    std::vector<IndexSet> bipartitions;  // extra audit splits
    std::optional<MixtureOfTreesParams> trees;
};

inline Instance generate_instance(const InstanceSpec& s) {
    Instance inst;
    inst.spec = s;
    Rng rng(s.rng);
    switch (s.family) {
    case Family::product: {
        inst.net = random_product_net(s.n, s.d, rng);
        if (s.n <= kInstanceDenseMax) inst.dense = inst.net->to_dense();
        std::vector<double> p;
        for (std::size_t i = 0; i < s.n; ++i) p.push_back(inst.net->cpt(i)[0]);
        inst.params = {{"marginals", p}};
        break;
    }
    case Family::mixture_trees: {
        auto g = gen_mixture_of_trees(s.n, s.d, s.eps, rng, s.odd);
        const auto& p = g.params;
        json lam = json::array();
        for (auto [a, b] : p.lambda) lam.push_back({a, b});
        inst.params = {{"N", p.N}, {"D", p.D}, {"delta", p.delta}, {"lambda", lam},
                       {"unmatched", p.unmatched ? json(*p.unmatched) : json(nullptr)}, {"mu", p.mu}};
        if (p.pointer_bits() > 0) inst.bipartitions.push_back(p.pointer_coords());
        inst.net = g.net;
        inst.dense = g.dense;
        inst.trees = p;
        break;
    }
    case Family::mixture_products: {
        auto g = gen_mixture_of_products(s.n, s.d, s.eps, rng);
        inst.params = {{"N", g.params.N}, {"delta", g.params.delta}, {"z", g.params.z}};
        IndexSet ptr;
        for (std::size_t i = 0; i < s.d; ++i) ptr.push_back(i);
        inst.bipartitions.push_back(ptr);
        inst.net = g.net;
        inst.dense = g.dense;
        break;
    }
    case Family::paninski: {
        auto g = gen_paninski(s.n, s.eps, rng, s.C);
        std::vector<std::size_t> S;
        for (std::size_t x = 0; x < g.params.in_S.size(); ++x)
            if (g.params.in_S[x]) S.push_back(x);
        inst.params = {{"C", s.C}, {"C_eps", g.params.C_eps()}, {"S", S}};
        inst.dense = g.dense;
        break;
    }
    }
    return inst;
}

inline SampleSet draw_samples(const Instance& inst, Rng& rng, std::size_t m) {
    if (inst.net) return inst.net->sample(rng, m);
    return sample_dense(*inst.dense, rng, m);
}

inline TestReport test_instance(const Instance& inst, std::size_t d, double eps, const TesterConfig& cfg, Rng& rng) {
    auto sampler = [&](Rng& r, std::size_t m) { return draw_samples(inst, r, m); };
    return independence_test_degree_d(sampler, inst.spec.n, d, eps, cfg, rng);
}

inline json instance_to_json(const Instance& inst) {
    json j;
    j["family"] = family_name(inst.spec.family);
    j["n"] = inst.spec.n;
    j["d"] = inst.spec.d;
    j["eps"] = inst.spec.eps;
    j["seed"] = inst.spec.rng.seed;
    j["stream"] = inst.spec.rng.stream;
    j["C"] = inst.spec.C;
    j["strict_even"] = inst.spec.odd == OddChildPolicy::refuse;
    j["params"] = inst.params;
    j["net"] = inst.net ? to_json(*inst.net) : json(nullptr);
    j["dense"] = inst.dense ? to_json(*inst.dense) : json(nullptr);
    return j;
}

// regenerate from the stored generator inputs and insist that the stored payload matches
inline Instance instance_from_json(const json& j) {
    InstanceSpec s;
    s.family = parse_family(detail::get_field<std::string>(j, "family"));
    s.n = detail::get_field<std::size_t>(j, "n");
    s.d = detail::get_field<std::size_t>(j, "d");
    s.eps = detail::get_field<double>(j, "eps");
    s.rng.seed = detail::get_field<std::uint64_t>(j, "seed");
    s.rng.stream = detail::get_field<std::uint64_t>(j, "stream");
    if (j.contains("C")) s.C = detail::get_field<double>(j, "C");
    if (j.contains("strict_even") && detail::get_field<bool>(j, "strict_even")) s.odd = OddChildPolicy::refuse;
    Instance inst = generate_instance(s);
    if (j.contains("params") && j.at("params") != inst.params)
        throw Error(Errc::InstanceMismatch, "stored params differ from the regenerated instance");
    if (j.contains("net") && !j.at("net").is_null()) {
        auto stored = bayes_net_from_json(j.at("net"));
        if (!inst.net || !(to_json(stored) == to_json(*inst.net)))
            throw Error(Errc::InstanceMismatch, "stored net differs from the regenerated instance");
    }
    return inst;
}

struct Cell {
    Family family = Family::product;
    std::size_t n = 0, d = 0;
    double eps = 0.0;
    std::uint64_t m = 0;  // 0: the tester's own sample count
};

struct ExperimentManifest {
    std::vector<Cell> cells;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::string out;
    TesterConfig tester;
    bool record_runtime = false;
};

struct PowerCurveRow {
    Family family = Family::product;
    std::size_t n = 0, d = 0;
    double eps = 0.0;
    std::uint64_t m = 0;
    std::size_t trials = 0;
    std::size_t requested_trials = 0;
    std::size_t rejections = 0;
    double reject_rate = NAN;
    std::optional<double> mean_runtime_ms;
    std::uint64_t seed = 0;
    std::string first_error;
};

inline std::uint64_t cell_hash(const Cell& c) {
    std::uint64_t h = hash_string(family_name(c.family));
    h = hash_combine(h, c.n);
    h = hash_combine(h, c.d);
    h = hash_combine(h, hash_string(format_double(c.eps)));
    return hash_combine(h, c.m);
}

inline std::uint64_t trial_stream(const Cell& c, std::uint64_t t) { return hash_combine(cell_hash(c), t); }

inline ExperimentManifest manifest_from_json(const json& j) {
    ExperimentManifest mf;
    mf.trials = detail::get_field<std::size_t>(j, "trials");
    mf.seed = detail::get_field<std::uint64_t>(j, "seed");
    if (j.contains("out")) mf.out = detail::get_field<std::string>(j, "out");
    if (j.contains("record_runtime")) mf.record_runtime = detail::get_field<bool>(j, "record_runtime");
    auto read_cell = [](const json& c) {
        Cell cell;
        cell.family = parse_family(detail::get_field<std::string>(c, "family"));
        cell.n = detail::get_field<std::size_t>(c, "n");
        cell.d = detail::get_field<std::size_t>(c, "d");
        cell.eps = detail::get_field<double>(c, "eps");
        if (c.contains("m")) cell.m = detail::get_field<std::uint64_t>(c, "m");
        return cell;
    };
    if (j.contains("cells"))
        for (const auto& c : j.at("cells")) mf.cells.push_back(read_cell(c));
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        auto fams = detail::get_field<std::vector<std::string>>(g, "family");
        auto ns = detail::get_field<std::vector<std::size_t>>(g, "n");
        auto ds = detail::get_field<std::vector<std::size_t>>(g, "d");
        auto es = detail::get_field<std::vector<double>>(g, "eps");
        std::vector<std::uint64_t> ms = {0};
        if (g.contains("m")) ms = detail::get_field<std::vector<std::uint64_t>>(g, "m");
        for (auto& f : fams)
            for (auto n : ns)
                for (auto d : ds)
                    for (auto e : es)
                        for (auto m : ms) mf.cells.push_back(Cell{parse_family(f), n, d, e, m});
    }
    if (j.contains("tester")) {
        const auto& t = j.at("tester");
        if (t.contains("c_learn")) mf.tester.c_learn = detail::get_field<double>(t, "c_learn");
        if (t.contains("c_test")) mf.tester.c_test = detail::get_field<double>(t, "c_test");
        if (t.contains("c_amp")) mf.tester.c_amp = detail::get_field<double>(t, "c_amp");
    }
    return mf;
}

inline PowerCurveRow run_cell(const ExperimentManifest& mf, const Cell& c, unsigned threads) {
    PowerCurveRow row;
    row.family = c.family;
    row.n = c.n;
    row.d = c.d;
    row.eps = c.eps;
    row.seed = mf.seed;
    row.requested_trials = mf.trials;
    TesterConfig cfg = mf.tester;
    cfg.threads = 1;
    if (c.m > 0) cfg.sample_budget = c.m;
    try {
        row.m = plan_degree_d(c.n, c.d, c.eps, cfg).m;
    } catch (const Error& e) {
        row.first_error = e.what();
        row.m = c.m;
        return row;
    }
    std::vector<int> outcome(mf.trials, -1);  // -1 failed, 0 accept, 1 reject
    std::vector<double> ms(mf.trials, 0.0);
    std::vector<std::string> errs(mf.trials);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t t = next.fetch_add(1);
            if (t >= mf.trials) return;
            try {
                Rng root(mf.seed, trial_stream(c, t));
                InstanceSpec spec{c.family, c.n, c.d, c.eps, root.split(0).state()};
                auto start = std::chrono::steady_clock::now();
                auto inst = generate_instance(spec);
                Rng test_rng = root.split(1);
                auto rep = test_instance(inst, c.d, c.eps, cfg, test_rng);
                ms[t] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                outcome[t] = rep.verdict == Verdict::reject ? 1 : 0;
            } catch (const std::exception& e) {
                errs[t] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < std::max(1u, threads); ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    double total_ms = 0;
    for (std::size_t t = 0; t < mf.trials; ++t) {
        if (outcome[t] < 0) {
            if (row.first_error.empty()) row.first_error = errs[t];
            continue;
        }
        ++row.trials;
        row.rejections += std::size_t(outcome[t]);
        total_ms += ms[t];
    }
    if (row.trials > 0) {
        row.reject_rate = double(row.rejections) / double(row.trials);
        if (mf.record_runtime) row.mean_runtime_ms = total_ms / double(row.trials);
    }
    return row;
}

inline std::vector<PowerCurveRow> run_power(const ExperimentManifest& mf, unsigned threads) {
    std::vector<PowerCurveRow> rows;
    for (const auto& c : mf.cells) rows.push_back(run_cell(mf, c, threads));
    return rows;
}

inline const char* kPowerCsvHeader = "family,n,d,eps,m,trials,reject_rate,mean_runtime_ms,seed";

inline std::string power_csv(const std::vector<PowerCurveRow>& rows) {
    std::ostringstream out;
    out << kPowerCsvHeader << "\n";
    for (const auto& r : rows) {
        out << family_name(r.family) << "," << r.n << "," << r.d << "," << format_double(r.eps) << "," << r.m << "," << r.trials << ",";
        out << (r.trials > 0 ? format_double(r.reject_rate) : std::string("NA")) << ",";
        out << (r.mean_runtime_ms ? format_double(*r.mean_runtime_ms) : std::string("NA")) << "," << r.seed << "\n";
    }
    return out.str();
}

} // namespace bnit
