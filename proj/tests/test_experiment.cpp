#include <gtest/gtest.h>

#include <sstream>

#include "bnit/experiment.hpp"
#include "bnit/io.hpp"

using namespace bnit;

namespace {

ExperimentManifest small_manifest(std::size_t trials) {
    auto j = json::parse(R"({
        "trials": 0, "seed": 99,
        "cells": [{"family": "product", "n": 5, "d": 1, "eps": 0.6, "m": 40000},
                  {"family": "mixture_trees", "n": 6, "d": 1, "eps": 0.6, "m": 40000}]
    })");
    j["trials"] = trials;
    return manifest_from_json(j);
}

} // namespace

TEST(Manifest, CellsAndGrid) {
    auto j = json::parse(R"({
        "trials": 7, "seed": 3, "out": "x.csv", "record_runtime": true,
        "cells": [{"family": "paninski", "n": 4, "d": 1, "eps": 0.2}],
        "grid": {"family": ["product", "mixture_products"], "n": [6, 8], "d": [1], "eps": [0.3, 0.5], "m": [100, 200]},
        "tester": {"c_learn": 5, "c_amp": 2}
    })");
    auto mf = manifest_from_json(j);
    EXPECT_EQ(mf.trials, 7u);
    EXPECT_EQ(mf.seed, 3u);
    EXPECT_EQ(mf.out, "x.csv");
    EXPECT_TRUE(mf.record_runtime);
    ASSERT_EQ(mf.cells.size(), 1u + 2 * 2 * 1 * 2 * 2);
    EXPECT_EQ(mf.cells[0].family, Family::paninski);
    EXPECT_EQ(mf.cells[0].m, 0u);
    EXPECT_EQ(mf.cells[1].family, Family::product);
    EXPECT_EQ(mf.cells[1].m, 100u);
    EXPECT_EQ(mf.cells.back().family, Family::mixture_products);
    EXPECT_EQ(mf.tester.c_learn, 5.0);
    EXPECT_EQ(mf.tester.c_test, 10.0);
    EXPECT_EQ(mf.tester.c_amp, 2.0);
}

TEST(Manifest, MissingFieldIsParseError) {
    try {
        manifest_from_json(json::parse(R"({"seed": 1})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
    }
    EXPECT_THROW(manifest_from_json(json::parse(R"({"seed": 1, "trials": 2, "cells": [{"family": "trees", "n": 4, "d": 1, "eps": 0.2}]})")), Error);
}

TEST(PowerCsv, HeaderAndNaSentinel) {
    auto rows = run_power(small_manifest(0), 1);
    auto csv = power_csv(rows);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "family,n,d,eps,m,trials,reject_rate,mean_runtime_ms,seed");
    std::getline(in, line);
    EXPECT_EQ(line, "product,5,1,0.6,40000,0,NA,NA,99");
    std::getline(in, line);
    EXPECT_EQ(line, "mixture_trees,6,1,0.6,40000,0,NA,NA,99");
}

TEST(PowerCsv, RateIsExactRatio) {
    auto rows = run_power(small_manifest(6), 2);
    for (const auto& r : rows) {
        EXPECT_EQ(r.trials, 6u);
        EXPECT_EQ(r.reject_rate, double(r.rejections) / 6.0);
        EXPECT_FALSE(r.mean_runtime_ms);
    }
}

TEST(PowerCsv, IndependentOfThreadCountAndRepeatable) {
    auto mf = small_manifest(8);
    auto a = power_csv(run_power(mf, 1));
    auto b = power_csv(run_power(mf, 8));
    auto c = power_csv(run_power(mf, 1));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(PowerCsv, CellRerunInIsolationMatches) {
    auto mf = small_manifest(5);
    auto full = run_power(mf, 1);
    ExperimentManifest one = mf;
    one.cells = {mf.cells[1]};
    auto alone = run_power(one, 1);
    EXPECT_EQ(alone[0].rejections, full[1].rejections);
}

TEST(PowerCsv, FailingCellRecordsError) {
    auto j = json::parse(R"({"trials": 3, "seed": 1, "cells": [{"family": "mixture_trees", "n": 4, "d": 1, "eps": 1.0}]})");
    auto rows = run_power(manifest_from_json(j), 1);
    EXPECT_EQ(rows[0].trials, 0u);
    EXPECT_EQ(rows[0].requested_trials, 3u);
    EXPECT_FALSE(rows[0].first_error.empty());
}

TEST(Instances, JsonRoundTripRegenerates) {
    for (auto fam : {Family::product, Family::mixture_trees, Family::mixture_products, Family::paninski}) {
        InstanceSpec s{fam, 8, 2, 0.3, {7, 3}};
        auto inst = generate_instance(s);
        auto j = json::parse(instance_to_json(inst).dump());
        auto back = instance_from_json(j);
        EXPECT_EQ(back.params, inst.params);
        ASSERT_EQ(bool(back.dense), bool(inst.dense));
        if (inst.dense) {
            EXPECT_EQ(back.dense->mass(), inst.dense->mass());
        }
    }
}

TEST(Instances, TamperedParamsRejected) {
    InstanceSpec s{Family::mixture_trees, 8, 2, 0.3, {7, 3}};
    auto j = instance_to_json(generate_instance(s));
    j["params"]["mu"][0][0] = 1 - j["params"]["mu"][0][0].get<int>();
    try {
        instance_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InstanceMismatch);
    }
}

TEST(Instances, ProductsMostlyAcceptedTreesMostlyRejected) {
    int acc = 0, rej = 0;
    for (int t = 0; t < 100; ++t) {
        auto p = generate_instance({Family::product, 4, 1, 0.5, {300, std::uint64_t(t)}});
        Rng r1(301, t);
        acc += test_instance(p, 1, 0.5, {}, r1).verdict == Verdict::accept;
    }
    for (int t = 0; t < 20; ++t) {
        auto q = generate_instance({Family::mixture_trees, 6, 1, 0.6, {302, std::uint64_t(t)}});
        Rng r2(303, t);
        rej += test_instance(q, 1, 0.6, {}, r2).verdict == Verdict::reject;
    }
    EXPECT_GE(acc, 90);
    EXPECT_GE(rej, 18);
}
