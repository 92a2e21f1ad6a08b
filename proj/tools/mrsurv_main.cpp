#include "mrsurv/config.hpp"
#include "mrsurv/core.hpp"
#include "mrsurv/errors.hpp"
#include "mrsurv/estimate.hpp"
#include "mrsurv/simulate.hpp"
#include "mrsurv/verify.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

using namespace mrsurv;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kFit = 4 };

std::string config_help() {
    std::ostringstream out;
    out << "Config file keys (JSON):\n";
    for (const auto& [key, text] : config_keys()) out << "  " << key << "\n      " << text << "\n";
    out << "Data CSV: id, X, Delta, optional weight, then one column per covariate; empty or NA marks\n"
           "covariates of visits the subject did not reach.\n"
           "Exit codes: 0 ok, 2 config error, 3 data error, 4 fit error.";
    return out.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    return out;
}

struct Options {
    std::string data;
    std::string config;
    std::string out;
    std::string dgp{kTwoVisitTrial};
    std::uint64_t seed = 1;
    bool seed_given = false;
    int threads = 0;
    std::size_t reps = 0;          // 0: the benchmark default for the run type
    std::vector<std::size_t> n;    // empty: 2000 for simulate, the benchmark grid otherwise
    std::vector<std::string> estimators;
    bool marginal = false;
    bool conditional = false;
    std::vector<double> tau{60.0};
    std::size_t m = 1000000;
    std::size_t laws = 1000;
    std::vector<std::string> arms;
    int folds = 10;
    int degree = 2;
    bool interactions = false;
};

int cmd_simulate(const Options& o) {
    const auto& dgp = find_dgp(o.dgp);
    const std::size_t n = o.n.empty() ? 2000 : o.n.front();
    const Dataset data = generate(dgp, n, o.seed);
    std::size_t events = 0;
    for (const auto& r : data.records) events += r.event ? 1 : 0;
    if (o.out.empty()) {
        write_dataset(std::cout, data);
    } else {
        auto out = open_out(o.out);
        write_dataset(out, data);
    }
    std::fprintf(stderr, "simulate: %s n=%zu seed=%llu events=%zu censored=%zu\n", dgp.name.c_str(), n,
                 static_cast<unsigned long long>(o.seed), events, n - events);
    return kOk;
}

int cmd_fit(const Options& o) {
    RunConfig config = load_config(o.config);
    if (!o.estimators.empty()) {
        config.estimators.clear();
        for (const auto& e : o.estimators) config.estimators.push_back(parse_estimator(e));
    }
    if (o.marginal) config.marginal = true;
    if (o.seed_given) config.seed = o.seed;
    validate_config(config);
    const Dataset data = load_dataset(o.data, config.schedule, config.schema);

    const RunResult result = run_estimation(data, config);
    std::fprintf(stderr, "fit: n=%zu folds=%d (sizes", data.size(), config.folds);
    for (std::size_t s : result.fold_sizes) std::fprintf(stderr, " %zu", s);
    std::fprintf(stderr, ")\n");
    for (const auto& row : result.table.rows) {
        if (row.trim_count > 0)
            std::fprintf(stderr, "fit: %s tau=%s trimmed rows=%zu\n", std::string(to_string(row.kind)).c_str(),
                         format_double(row.tau).c_str(), row.trim_count);
    }
    if (o.out.empty()) {
        result.table.write_csv(std::cout);
    } else {
        auto out = open_out(o.out);
        result.table.write_csv(out);
    }
    if (config.contrast) {
        const std::string path = o.out.empty() ? std::string("cde.csv") : o.out + ".cde.csv";
        auto out = open_out(path);
        write_contrast_csv(out, result.contrast, config.w.columns, config.contrast->log_scale);
        std::fprintf(stderr, "fit: contrast written to %s\n", path.c_str());
    }
    return kOk;
}

int cmd_truth(const Options& o) {
    const auto& dgp = find_dgp(o.dgp);
    for (double tau : o.tau) {
        const auto t = truth_marginal(dgp, tau, o.m, o.seed);
        std::printf("tau=%s truth=%.6f se=%.6f draws=%zu\n", format_double(tau).c_str(), t.value, t.se, o.m);
    }
    return kOk;
}

int cmd_verify(const Options& o) {
    const auto suite = run_identity_suite(o.laws, o.seed);
    print_identity_table(std::cout, suite);
    std::fprintf(stderr, "verify: %zu laws in %.2f s\n", o.laws, suite.seconds);
    return suite.passed() ? kOk : kFit;
}

int cmd_benchmark(const Options& o) {
    BenchmarkConfig cfg;
    cfg.dgp = o.dgp;
    if (!o.n.empty()) cfg.n_grid = o.n;
    cfg.reps = o.reps > 0 ? o.reps : (o.conditional ? 200 : 500);
    if (o.seed_given) cfg.seed = o.seed;
    if (!o.arms.empty()) cfg.arms = o.arms;
    cfg.conditional = o.conditional;
    cfg.taus = o.tau;
    cfg.folds = o.folds;
    cfg.basis.degree = o.degree;
    cfg.basis.interactions = o.interactions;
    cfg.truth_draws = o.m;
    const auto report = run_benchmark(cfg);
    const std::string stem = o.out.empty() ? std::string("benchmark") : o.out;
    {
        auto out = open_out(stem + ".csv");
        report.write_csv(out);
    }
    {
        auto out = open_out(stem + ".json");
        report.write_json(out);
    }
    for (const auto& s : report.summaries) {
        std::printf("%-11s n=%-5zu fail=%-3zu mean=%.4f bias=%+.4f sd=%.4f cover=%.3f l2=%.4f\n", s.arm.c_str(), s.n,
                    s.failures, s.mean, s.bias, s.sd, s.coverage, s.mean_l2);
    }
    std::fprintf(stderr, "benchmark: truth=%.4f (se %.4f) in %.1f s\n", report.truth.value, report.truth.se, report.seconds);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiply robust survival estimation under covariate-dependent censoring"};
    app.footer(config_help());
    app.require_subcommand(1);
    Options o;

    auto add_threads = [&](CLI::App* sub) { sub->add_option("--threads", o.threads, "cap on worker threads"); };
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& s) { o.seed = s; o.seed_given = true; }, "random seed");
    };

    auto* sim = app.add_subcommand("simulate", "draw a dataset from a named mechanism");
    sim->add_option("--dgp", o.dgp, "mechanism name")->capture_default_str();
    sim->add_option("--n", o.n, "sample size (default 2000)")->expected(1);
    sim->add_option("--out", o.out, "output CSV (stdout if omitted)");
    add_seed(sim);
    add_threads(sim);

    auto* fit = app.add_subcommand("fit", "estimate Q(w) or marginal survival from a dataset");
    fit->add_option("--data", o.data, "input CSV")->required();
    fit->add_option("--config", o.config, "JSON config")->required();
    fit->add_option("--out", o.out, "estimate CSV (stdout if omitted)");
    fit->add_option("--estimator", o.estimators, "override estimators: mr, g, ipcw");
    fit->add_flag("--marginal", o.marginal, "estimate marginal survival");
    add_seed(fit);
    add_threads(fit);

    auto* truth = app.add_subcommand("truth", "Monte Carlo marginal survival of a mechanism");
    truth->add_option("--dgp", o.dgp, "mechanism name")->capture_default_str();
    truth->add_option("--tau", o.tau, "evaluation times")->capture_default_str();
    truth->add_option("--m", o.m, "number of draws")->capture_default_str();
    add_seed(truth);
    add_threads(truth);

    auto* ver = app.add_subcommand("verify", "exact identity checks on random discrete laws");
    ver->add_option("--laws", o.laws, "number of random laws")->capture_default_str();
    add_seed(ver);
    add_threads(ver);

    auto* bench = app.add_subcommand("benchmark", "replicate the estimator comparison");
    bench->add_option("--dgp", o.dgp, "mechanism name")->capture_default_str();
    bench->add_option("--n", o.n, "sample sizes (default 500 1000 2000)");
    bench->add_option("--reps", o.reps, "replicates per sample size (default 500, or 200 with --conditional)");
    bench->add_option("--arms", o.arms, "subset of MR MR.Smis MR.Gmis Gcomp Gcomp.Smis IPCW IPCW.Gmis");
    bench->add_flag("--conditional", o.conditional, "measure the L2 distance of Q(w) instead of marginal bias");
    bench->add_flag("--marginal", o.marginal, "marginal run (the default)");
    bench->add_option("--tau", o.tau, "evaluation times; the last is the target")->capture_default_str();
    bench->add_option("--folds", o.folds, "cross-fitting folds")->capture_default_str();
    bench->add_option("--degree", o.degree, "polynomial degree of the conditional basis")->capture_default_str();
    bench->add_flag("--interactions", o.interactions, "add pairwise products of W columns to the conditional basis");
    bench->add_option("--m", o.m, "draws for the marginal truth")->capture_default_str();
    bench->add_option("--out", o.out, "output stem: writes <stem>.csv and <stem>.json");
    add_seed(bench);
    add_threads(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (o.threads > 0) omp_set_num_threads(o.threads);
        for (std::size_t n : o.n)
            if (n == 0) throw ConfigError("--n must be a positive sample size");
        if (*sim) return cmd_simulate(o);
        if (*fit) return cmd_fit(o);
        if (*truth) return cmd_truth(o);
        if (*ver) return cmd_verify(o);
        if (*bench) {
            if (o.marginal && o.conditional) throw ConfigError("--marginal and --conditional are exclusive");
            return cmd_benchmark(o);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const FitError& e) {
        std::fprintf(stderr, "fit error: %s\n", e.what());
        return kFit;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "fit error: %s\n", e.what());
        return kFit;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternal;
    }
    return kInternal;
}
