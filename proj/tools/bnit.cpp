#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "bnit/bounds.hpp"
#include "bnit/calibration.hpp"
#include "bnit/experiment.hpp"
#include "bnit/farness.hpp"
#include "bnit/io.hpp"

using namespace bnit;

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::size_t n = 0, d = 0;
    double eps = 0.3;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    std::uint64_t m = 0;
    unsigned threads = 1;
    std::string out;
};

void emit(const std::string& text, const std::string& path) {
    if (path.empty())
        std::cout << text;
    else
        write_text_file(path, text);
}

int cmd_gen(const std::string& family, const Common& o, double C, bool strict_even) {
    InstanceSpec s;
    s.family = parse_family(family);
    s.n = o.n;
    s.d = o.d;
    s.eps = o.eps;
    s.rng = {o.seed, o.stream};
    s.C = C;
    s.odd = strict_even ? OddChildPolicy::refuse : OddChildPolicy::leave_unmatched;
    auto inst = generate_instance(s);
    auto j = instance_to_json(inst);
    emit(j.dump() + "\n", o.out);
    if (!o.out.empty() && inst.dense && inst.spec.n <= kInstanceDenseMax) {
        const auto& P = *inst.dense;
        json summary;
        summary["family"] = family;
        summary["n"] = P.n();
        summary["mass_sum"] = accurate_sum(P.mass());
        summary["tv_to_uniform"] = tv(P, DenseDistribution::uniform(P.n()));
        summary["tv_to_prod_marginals"] = tv(P, product_of_marginals(P).expand());
        std::cout << summary.dump() << "\n";
    }
    return kExitAccept;
}

Instance load_instance(const std::string& path) { return instance_from_json(parse_json_file(path)); }

int cmd_test(const std::string& file, bool product, const Common& o, TesterConfig cfg) {
    Instance inst;
    std::size_t d = o.d;
    if (!file.empty()) {
        inst = load_instance(file);
        if (d == 0) d = inst.spec.d;
    } else if (product) {
        InstanceSpec s;
        s.family = Family::product;
        s.n = o.n;
        s.d = o.d;
        s.eps = o.eps;
        s.rng = {o.seed, o.stream};
        inst = generate_instance(s);
    } else {
        throw Error(Errc::InvalidArgument, "test needs an instance file or --product");
    }
    if (o.m > 0) cfg.sample_budget = o.m;
    cfg.threads = o.threads;
    Rng rng(o.seed, hash_combine(o.stream, 0x7E57));
    auto rep = test_instance(inst, d, o.eps, cfg, rng);
    emit(to_json(rep).dump() + "\n", o.out);
    return rep.verdict == Verdict::accept ? kExitAccept : kExitReject;
}

int cmd_power(const std::string& manifest, const Common& o, bool timing) {
    auto mf = manifest_from_json(parse_json_file(manifest));
    if (timing) mf.record_runtime = true;
    std::string out = o.out.empty() ? mf.out : o.out;
    auto rows = run_power(mf, o.threads);
    for (const auto& r : rows)
        if (r.trials < r.requested_trials)
            std::cerr << "cell " << family_name(r.family) << " n=" << r.n << " d=" << r.d << " eps=" << format_double(r.eps)
                      << ": trials_completed=" << r.trials << " of " << r.requested_trials
                      << (r.first_error.empty() ? "" : " (" + r.first_error + ")") << "\n";
    emit(power_csv(rows), out);
    return kExitAccept;
}

int cmd_audit(const std::string& file, const Common& o) {
    auto inst = load_instance(file);
    if (!inst.dense) throw Error(Errc::TooLargeForAudit, "instance has no dense form (n > 14)");
    auto cert = farness_audit(*inst.dense, inst.bipartitions);
    emit(to_json(cert).dump() + "\n", o.out);
    return kExitAccept;
}

int cmd_bounds(const std::string& suite, const Common& o) {
    Suite s = suite == "exact" ? Suite::exact : suite == "mc" ? Suite::mc : suite == "all" ? Suite::all : throw Error(Errc::InvalidArgument, "suite must be exact, mc or all");
    auto results = run_bounds_suite(s, o.seed);
    std::string text;
    bool failed = false;
    for (const auto& r : results) {
        text += to_json(r).dump() + "\n";
        failed = failed || r.failed();
    }
    emit(text, o.out);
    return failed ? 1 : kExitAccept;
}

int cmd_calibrate(std::uint64_t k, const Common& o, std::size_t trials) {
    auto cache = CalibrationCache::from_env();
    Rng rng(o.seed, hash_string(calibration_key(k, o.eps, o.m)));
    auto res = calibrate_threshold_detail(k, o.eps, o.m, trials, rng);
    cache.store(calibration_key(k, o.eps, o.m), res.tau);
    json j;
    j["key"] = calibration_key(k, o.eps, o.m);
    j["tau"] = res.tau;
    j["type1"] = res.type1;
    j["type2"] = res.type2;
    j["cache"] = cache.file().string();
    emit(j.dump() + "\n", o.out);
    return kExitAccept;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"independence testing for bounded-degree Bayes nets"};
    app.require_subcommand(1);
    Common o;
    TesterConfig cfg;
    std::string threshold = "analytic";
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--n", o.n, "dimension");
        sub->add_option("--d", o.d, "degree");
        sub->add_option("--eps", o.eps, "distance parameter");
        sub->add_option("--seed", o.seed, "root seed");
        sub->add_option("--stream", o.stream, "stream id");
        sub->add_option("--m", o.m, "sample count");
        sub->add_option("--threads", o.threads, "worker threads");
        sub->add_option("--out", o.out, "output file (default stdout)");
    };

    std::string family;
    double C = 2.0;
    bool strict_even = false;
    auto* gen = app.add_subcommand("gen", "generate an instance file");
    gen->add_option("family,--family", family, "product | mixture_trees | mixture_products | paninski");
    gen->add_option("--C", C, "Paninski perturbation constant");
    gen->add_flag("--strict-even", strict_even, "refuse odd child counts for mixture_trees");
    add_common(gen);

    std::string file;
    bool product = false;
    auto* test = app.add_subcommand("test", "run the degree-d independence tester");
    test->add_option("instance", file, "instance file");
    test->add_flag("--product", product, "test a fresh random product net of size --n, degree --d");
    test->add_option("--threshold", threshold, "analytic | calibrated");
    test->add_option("--c-learn", cfg.c_learn);
    test->add_option("--c-test", cfg.c_test);
    test->add_option("--c-amp", cfg.c_amp);
    test->add_flag("--poissonized", cfg.poissonized);
    add_common(test);

    std::string manifest;
    bool timing = false;
    auto* power = app.add_subcommand("power", "Monte-Carlo power sweep to CSV");
    power->add_option("manifest", manifest, "manifest JSON")->required();
    power->add_flag("--timing", timing, "record mean_runtime_ms (output is then not reproducible)");
    add_common(power);

    auto* audit = app.add_subcommand("audit", "farness certificate for an instance");
    audit->add_option("instance", file, "instance file")->required();
    add_common(audit);

    std::string suite = "exact";
    std::uint64_t bounds_seed = 20241014;
    auto* bounds = app.add_subcommand("bounds", "numerical inequality suite");
    bounds->add_option("--suite", suite, "exact | mc | all");
    bounds->add_option("--seed", bounds_seed, "seed for the randomised grids");
    bounds->add_option("--out", o.out, "output file (default stdout)");

    std::uint64_t k = 16;
    std::size_t trials = 5000;
    auto* calib = app.add_subcommand("calibrate", "calibrate an identity-test threshold into the cache");
    calib->add_option("--k", k, "domain size (power of two)");
    calib->add_option("--trials", trials, "Monte-Carlo trials per hypothesis");
    add_common(calib);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) {
            if (family.empty()) throw Error(Errc::InvalidArgument, "gen needs a family");
            return cmd_gen(family, o, C, strict_even);
        }
        if (*test) {
            if (threshold == "calibrated") {
                static CalibrationCache cache = CalibrationCache::from_env();
                cfg.threshold_mode = ThresholdMode::calibrated;
                cfg.cache = &cache;
            } else if (threshold != "analytic") {
                throw Error(Errc::InvalidArgument, "threshold must be analytic or calibrated");
            }
            return cmd_test(file, product, o, cfg);
        }
        if (*power) return cmd_power(manifest, o, timing);
        if (*audit) return cmd_audit(file, o);
        if (*bounds) {
            o.seed = bounds_seed;
            return cmd_bounds(suite, o);
        }
        if (*calib) {
            if (o.m == 0) o.m = 2000;
            return cmd_calibrate(k, o, trials);
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
