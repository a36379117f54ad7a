#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aql/errors.hpp"
#include "aql/harness.hpp"
#include "aql/oracle.hpp"
#include "json.hpp"

namespace {

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw aql::invalid_input_error("cannot read config file: " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw aql::invalid_input_error("config file " + path + ": " + e.what());
    }
}

int dispatch(int argc, char** argv) {
    CLI::App app{"adaptive Q-learning experiment harness"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a seeded experiment and write artifacts");
    std::string r_env, r_agent, r_out, r_config;
    long long r_episodes = 0;
    int r_horizon = 0, r_depth = 0;
    double r_delta = 0, r_lip = 0, r_grid = 0, r_eps = 0;
    std::vector<std::uint64_t> r_seeds;
    bool r_no_svg = false, r_no_steps = false;
    run->add_option("--env", r_env, "environment name");
    run->add_option("--agent", r_agent, "adaptive or uniform");
    run->add_option("--episodes", r_episodes, "episode count K");
    run->add_option("--horizon", r_horizon, "horizon override (0 keeps the env default)");
    run->add_option("--delta", r_delta, "confidence parameter in (0,1)");
    run->add_option("--lipschitz", r_lip, "Lipschitz constant (negative uses the env hint)");
    run->add_option("--seed", r_seeds, "seed list S[,S...]")->delimiter(',');
    run->add_option("--grid", r_grid, "oracle discretization step");
    run->add_option("--epsilon", r_eps, "uniform-agent ball radius");
    run->add_option("--max-depth", r_depth, "split depth cap");
    run->add_option("--out", r_out, "output directory");
    run->add_option("--config", r_config, "JSON config file (flags override it)");
    run->add_flag("--no-svg", r_no_svg, "skip the SVG regret plot");
    run->add_flag("--no-steps", r_no_steps, "skip per-step logging (episode log is empty)");

    // compare
    auto* cmp = app.add_subcommand("compare", "compare two artifact directories");
    std::string c_a, c_b, c_out;
    cmp->add_option("--a", c_a, "first artifact directory")->required();
    cmp->add_option("--b", c_b, "second artifact directory")->required();
    cmp->add_option("--out", c_out, "output directory")->required();

    // dims
    auto* dim = app.add_subcommand("dims", "fit zooming and covering dimensions");
    std::string d_env, d_out;
    int d_scales = 7, d_horizon = 0;
    double d_grid = 1.0 / 512.0, d_lip = -1.0;
    dim->add_option("--env", d_env, "environment name")->required();
    dim->add_option("--scales", d_scales, "number of dyadic scales");
    dim->add_option("--grid", d_grid, "oracle discretization step");
    dim->add_option("--horizon", d_horizon, "horizon override");
    dim->add_option("--lipschitz", d_lip, "Lipschitz constant (negative uses the env hint)");
    dim->add_option("--out", d_out, "output directory")->required();

    // oracle
    auto* orc = app.add_subcommand("oracle", "export oracle value tables as CSV");
    std::string o_env, o_out;
    int o_horizon = 0;
    double o_grid = 1.0 / 512.0;
    orc->add_option("--env", o_env, "environment name")->required();
    orc->add_option("--grid", o_grid, "oracle discretization step");
    orc->add_option("--horizon", o_horizon, "horizon override");
    orc->add_option("--out", o_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints help or the failure message; fold its exit codes into 0/2.
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (run->parsed()) {
        aql::harness::ExperimentConfig cfg;
        if (run->count("--config")) cfg = aql::harness::config_from_json(load_json_file(r_config));
        if (run->count("--env")) cfg.env = r_env;
        if (run->count("--agent")) cfg.agent = r_agent;
        if (run->count("--episodes")) cfg.episodes = r_episodes;
        if (run->count("--horizon")) cfg.horizon = r_horizon;
        if (run->count("--delta")) cfg.delta = r_delta;
        if (run->count("--lipschitz")) cfg.lipschitz = r_lip;
        if (run->count("--seed")) cfg.seeds = r_seeds;
        if (run->count("--grid")) cfg.eps_grid = r_grid;
        if (run->count("--epsilon")) cfg.epsilon = r_eps;
        if (run->count("--max-depth")) cfg.max_depth = r_depth;
        if (run->count("--out")) cfg.out_dir = r_out;
        if (r_no_svg) cfg.svg = false;
        if (r_no_steps) cfg.collect_steps = false;
        auto summaries = aql::harness::run_experiment(cfg);
        for (const auto& s : summaries) {
            const auto& slope = s.at("regret").at("slope");
            std::printf("seed %llu: total regret %.6g, slope %s\n",
                        static_cast<unsigned long long>(s.at("seed").get<std::uint64_t>()),
                        s.at("regret").at("total").get<double>(),
                        slope.is_null() ? "n/a" : std::to_string(slope.at("slope").get<double>()).c_str());
        }
        std::printf("artifacts in %s\n", cfg.out_dir.c_str());
        return 0;
    }
    if (cmp->parsed()) {
        auto doc = aql::harness::compare(c_a, c_b, c_out);
        auto show = [](const nlohmann::json& side) {
            const auto& slope = side.at("median_slope");
            std::printf("%s: agent %s, median total regret %.6g, median slope %s\n",
                        side.at("dir").get<std::string>().c_str(),
                        side.at("agent").get<std::string>().c_str(),
                        side.at("median_total").get<double>(),
                        slope.is_null() ? "n/a" : std::to_string(slope.get<double>()).c_str());
        };
        show(doc.at("a"));
        show(doc.at("b"));
        std::printf("comparison in %s\n", c_out.c_str());
        return 0;
    }
    if (dim->parsed()) {
        auto doc = aql::harness::dims(d_env, d_scales, d_grid, d_out, d_horizon, d_lip);
        std::printf("covering slope %.4f\n",
                    doc.at("covering").at("fit").at("slope").get<double>());
        for (const auto& z : doc.at("zooming"))
            std::printf("zooming slope (h=%d) %.4f\n", z.at("h").get<int>(),
                        z.at("fit").at("slope").get<double>());
        std::printf("report in %s\n", d_out.c_str());
        return 0;
    }
    if (orc->parsed()) {
        auto environment = aql::env::make_environment(o_env, o_horizon);
        auto oracle = aql::env::build_oracle(*environment, o_grid);
        aql::env::export_oracle_csv(oracle, o_out);
        std::printf("oracle tables in %s\n", o_out.c_str());
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const aql::invalid_input_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const aql::invariant_violation_error& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return 3;
    } catch (const aql::resource_limit_error& e) {
        std::cerr << "resource limit: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}
