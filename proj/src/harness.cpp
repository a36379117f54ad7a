#include "aql/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "aql/errors.hpp"
#include "aql/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aql::harness {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw invalid_input_error("cannot write file: " + path.string());
    return out;
}

json fit_to_json(const diag::DimensionFit& fit) {
    return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"se", fit.se},
            {"lo", fit.lo},       {"hi", fit.hi},               {"points", fit.points}};
}

json check_to_json(const diag::CheckReport& rep) {
    return {{"ok", rep.ok},
            {"items_checked", rep.items_checked},
            {"violation_count", rep.violation_count},
            {"excluded", rep.excluded},
            {"violations", rep.violations}};
}

json ball_to_json(const agent::Ball& b) {
    return {{"id", b.id},           {"parent", b.parent},
            {"depth", b.depth},     {"radius", b.radius},
            {"ci", b.ci},           {"cj", b.cj},
            {"cx", b.cx},           {"ca", b.ca},
            {"q", b.q},             {"count", b.count},
            {"inherited", b.inherited}, {"selections", b.selections},
            {"active", b.active},   {"created_episode", b.created_episode},
            {"children", b.children}};
}

void write_episode_log(const fs::path& path, const agent::RunResult& run) {
    auto out = open_out(path);
    for (const auto& r : run.steps) {
        json line = {{"episode", r.episode},
                     {"h", r.h},
                     {"ball", r.ball},
                     {"radius", r.radius},
                     {"t", r.t},
                     {"b", r.b},
                     {"q_before", r.q_before},
                     {"q_after", r.q_after},
                     {"reward", r.reward},
                     {"v_next", r.v_next},
                     {"x", r.x},
                     {"xs", r.xs},
                     {"a", r.a},
                     {"x_next", r.x_next},
                     {"split_children", r.split_children}};
        out << line.dump() << '\n';
    }
}

void write_tree(const fs::path& path, const agent::RunResult& run) {
    json stages = json::array();
    for (std::size_t h = 0; h < run.final_balls.size(); ++h) {
        json balls = json::array();
        for (const auto& b : run.final_balls[h]) balls.push_back(ball_to_json(b));
        stages.push_back({{"h", static_cast<int>(h) + 1}, {"balls", std::move(balls)}});
    }
    json doc = {{"env", run.env_name},
                {"agent", run.agent_kind},
                {"seed", run.seed},
                {"epsilon", run.epsilon},
                {"stages", std::move(stages)}};
    open_out(path) << doc.dump(2) << '\n';
}

void write_regret_csv(const fs::path& path, const agent::RunResult& run,
                      const diag::RegretReport& rep) {
    auto out = open_out(path);
    out << "k,start,vstar,return,regret,cumulative\n";
    for (long long k = 0; k < rep.K; ++k) {
        out << (k + 1) << ',' << fmt(run.starts[k][0]) << ',' << fmt(rep.vstar[k]) << ','
            << fmt(rep.returns[k]) << ',' << fmt(rep.vstar[k] - rep.returns[k]) << ','
            << fmt(rep.cumulative[k]) << '\n';
    }
}

void write_regret_svg(const fs::path& path, const diag::RegretReport& rep,
                      const std::string& title) {
    const double W = 720, Hpx = 440, ml = 70, mr = 20, mt = 40, mb = 50;
    double ymax = 1.0;
    for (double v : rep.cumulative) ymax = std::max(ymax, v);
    double xmax = static_cast<double>(std::max<long long>(rep.K, 1));

    // At most ~1000 polyline points, sampled evenly.
    long long stride = std::max<long long>(1, rep.K / 1000);
    std::string pts;
    for (long long k = 0; k < rep.K; k += stride) {
        double px = ml + (W - ml - mr) * (static_cast<double>(k + 1) / xmax);
        double py = Hpx - mb - (Hpx - mt - mb) * (rep.cumulative[k] / ymax);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px, py);
        pts += buf;
    }

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << ' ' << Hpx
        << "\">\n"
        << "<rect width=\"" << W << "\" height=\"" << Hpx << "\" fill=\"white\"/>\n"
        << "<text x=\"" << ml << "\" y=\"24\" font-family=\"monospace\" font-size=\"14\">"
        << title << "</text>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << Hpx - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << Hpx - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << Hpx - mb
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml << "\" y=\"" << Hpx - mb + 20
        << "\" font-family=\"monospace\" font-size=\"12\">1</text>\n"
        << "<text x=\"" << W - mr - 60 << "\" y=\"" << Hpx - mb + 20
        << "\" font-family=\"monospace\" font-size=\"12\">k=" << rep.K << "</text>\n"
        << "<text x=\"8\" y=\"" << mt + 6 << "\" font-family=\"monospace\" font-size=\"12\">"
        << fmt(ymax) << "</text>\n"
        << "<text x=\"8\" y=\"" << Hpx - mb << "\" font-family=\"monospace\" font-size=\"12\">"
        << "0</text>\n"
        << "<polyline fill=\"none\" stroke=\"#1f6feb\" stroke-width=\"1.5\" points=\"" << pts
        << "\"/>\n</svg>\n";
}

json histogram_json(const std::vector<agent::Ball>& balls) {
    std::map<double, long long> active;
    for (const auto& b : balls)
        if (b.active) active[b.radius] += 1;
    json rows = json::array();
    for (auto [radius, n] : active) rows.push_back({{"radius", radius}, {"active", n}});
    return rows;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<json> read_summaries(const std::string& dir) {
    std::vector<fs::path> paths;
    if (!fs::is_directory(dir)) throw invalid_input_error("compare: not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        auto name = e.path().filename().string();
        if (name.rfind("summary_seed", 0) == 0 && e.path().extension() == ".json")
            paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw invalid_input_error("compare: no summary_seed*.json in " + dir);
    std::vector<json> out;
    for (const auto& p : paths) {
        std::ifstream in(p);
        json j;
        in >> j;
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw invalid_input_error("config: root must be a JSON object");
    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "env")
                cfg.env = value.get<std::string>();
            else if (key == "agent")
                cfg.agent = value.get<std::string>();
            else if (key == "episodes")
                cfg.episodes = value.get<long long>();
            else if (key == "horizon")
                cfg.horizon = value.get<int>();
            else if (key == "delta")
                cfg.delta = value.get<double>();
            else if (key == "lipschitz")
                cfg.lipschitz = value.get<double>();
            else if (key == "eps_grid")
                cfg.eps_grid = value.get<double>();
            else if (key == "epsilon")
                cfg.epsilon = value.get<double>();
            else if (key == "seeds")
                cfg.seeds = value.get<std::vector<std::uint64_t>>();
            else if (key == "max_depth")
                cfg.max_depth = value.get<int>();
            else if (key == "out")
                cfg.out_dir = value.get<std::string>();
            else if (key == "svg")
                cfg.svg = value.get<bool>();
            else if (key == "collect_steps")
                cfg.collect_steps = value.get<bool>();
            else
                throw invalid_input_error("config: unknown field '" + key + "'");
        } catch (const json::exception&) {
            throw invalid_input_error("config: field '" + key + "' has the wrong type");
        }
    }
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    return {{"env", cfg.env},
            {"agent", cfg.agent},
            {"episodes", cfg.episodes},
            {"horizon", cfg.horizon},
            {"delta", cfg.delta},
            {"lipschitz", cfg.lipschitz},
            {"eps_grid", cfg.eps_grid},
            {"epsilon", cfg.epsilon},
            {"seeds", cfg.seeds},
            {"max_depth", cfg.max_depth},
            {"out", cfg.out_dir},
            {"svg", cfg.svg},
            {"collect_steps", cfg.collect_steps}};
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.env.empty()) throw invalid_input_error("config: field 'env' is required");
    if (cfg.agent != "adaptive" && cfg.agent != "uniform")
        throw invalid_input_error("config: field 'agent' must be 'adaptive' or 'uniform'");
    if (cfg.episodes < 1 || cfg.episodes > 10'000'000)
        throw invalid_input_error("config: field 'episodes' out of range [1, 1e7]");
    if (cfg.horizon < 0 || cfg.horizon > 50)
        throw invalid_input_error("config: field 'horizon' out of range [0, 50]");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
        throw invalid_input_error("config: field 'delta' must lie in (0, 1)");
    if (std::isnan(cfg.lipschitz))
        throw invalid_input_error("config: field 'lipschitz' must be a number");
    if (!(cfg.eps_grid > 0.0 && cfg.eps_grid <= 1.0))
        throw invalid_input_error("config: field 'eps_grid' out of range (0, 1]");
    if (!(cfg.epsilon > 0.0)) throw invalid_input_error("config: field 'epsilon' must be positive");
    if (cfg.seeds.empty()) throw invalid_input_error("config: field 'seeds' must be non-empty");
    if (cfg.max_depth < 0 || cfg.max_depth > 14)
        throw invalid_input_error("config: field 'max_depth' out of range [0, 14]");
    if (cfg.out_dir.empty()) throw invalid_input_error("config: field 'out' is required");
}

std::vector<json> run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    auto environment = env::make_environment(cfg.env, cfg.horizon);
    auto spec = environment->metric();

    agent::AgentConfig acfg;
    acfg.H = environment->horizon();
    acfg.episodes = cfg.episodes;
    acfg.delta = cfg.delta;
    acfg.lipschitz = cfg.lipschitz;
    acfg.d_max = spec.d_max;
    acfg.max_depth = cfg.max_depth;

    auto oracle = env::build_oracle(*environment, cfg.eps_grid);
    auto grid = environment->make_witness_grid(cfg.max_depth);
    agent::UniformPartition partition;
    if (cfg.agent == "uniform")
        partition = agent::build_uniform(cfg.epsilon, spec, grid, acfg.H);

    fs::create_directories(cfg.out_dir);
    std::vector<json> summaries;
    for (std::uint64_t seed : cfg.seeds) {
        agent::RunResult run;
        if (cfg.agent == "adaptive") {
            agent::RunOptions opt;
            opt.collect_steps = cfg.collect_steps;
            run = agent::run_adaptive(*environment, acfg, seed, opt);
        } else {
            run = agent::run_uniform(*environment, partition, acfg, seed, cfg.collect_steps);
        }

        auto rep = diag::regret(run, oracle);
        json checks;
        {
            diag::CheckReport part;
            for (const auto& stage : run.final_balls) {
                auto one = diag::check_partition(stage, grid, spec);
                part.ok = part.ok && one.ok;
                part.items_checked += one.items_checked;
                part.violation_count += one.violation_count;
                for (const auto& v : one.violations)
                    if (part.violations.size() < 50) part.violations.push_back(v);
            }
            checks["partition"] = check_to_json(part);
        }
        if (cfg.agent == "adaptive") {
            diag::CheckReport counts;
            for (const auto& stage : run.final_balls) {
                auto one = diag::check_counts(stage, run.cfg);
                counts.ok = counts.ok && one.ok;
                counts.items_checked += one.items_checked;
                counts.violation_count += one.violation_count;
                counts.excluded += one.excluded;
                for (const auto& v : one.violations)
                    if (counts.violations.size() < 50) counts.violations.push_back(v);
            }
            checks["counts"] = check_to_json(counts);
        } else {
            checks["counts"] = nullptr;
        }
        checks["optimism"] = cfg.collect_steps
                                 ? check_to_json(diag::check_optimism(run, oracle))
                                 : json(nullptr);

        std::string tag = "seed" + std::to_string(seed);
        fs::path dir(cfg.out_dir);
        write_episode_log(dir / ("episodes_" + tag + ".jsonl"), run);
        write_tree(dir / ("tree_" + tag + ".json"), run);
        write_regret_csv(dir / ("regret_" + tag + ".csv"), run, rep);
        if (cfg.svg)
            write_regret_svg(dir / ("regret_" + tag + ".svg"), rep,
                             cfg.env + " / " + cfg.agent + " / seed " + std::to_string(seed));

        double returns_total = 0.0;
        for (double r : run.returns) returns_total += r;
        json balls = json::array();
        for (std::size_t h = 0; h < run.final_balls.size(); ++h) {
            const auto& stage = run.final_balls[h];
            long long active = 0;
            int deepest = 0;
            for (const auto& b : stage) {
                active += b.active ? 1 : 0;
                deepest = std::max(deepest, b.depth);
            }
            balls.push_back({{"h", static_cast<int>(h) + 1},
                             {"total", stage.size()},
                             {"active", active},
                             {"deepest", deepest},
                             {"histogram", histogram_json(stage)}});
        }

        json cum_at = json::array();
        for (long long k : rep.checkpoints) cum_at.push_back(rep.cumulative[k - 1]);
        json summary = {
            {"config", config_to_json(cfg)},
            {"env", run.env_name},
            {"agent", run.agent_kind},
            {"seed", seed},
            {"epsilon", run.epsilon},
            {"resolved",
             {{"H", run.cfg.H}, {"lipschitz", run.cfg.lipschitz}, {"d_max", run.cfg.d_max}}},
            {"regret",
             {{"total", rep.total},
              {"checkpoints", rep.checkpoints},
              {"cumulative_at_checkpoints", cum_at},
              {"slope", rep.slope_valid ? fit_to_json(rep.slope) : json(nullptr)}}},
            {"checks", checks},
            {"balls", balls},
            {"returns_total", returns_total},
            {"steps_logged", run.steps.size()}};
        open_out(dir / ("summary_" + tag + ".json")) << summary.dump(2) << '\n';
        summaries.push_back(std::move(summary));
    }
    return summaries;
}

nlohmann::json compare(const std::string& a_dir, const std::string& b_dir,
                       const std::string& out_dir) {
    auto a = read_summaries(a_dir);
    auto b = read_summaries(b_dir);
    const std::string env = a.front().at("env");
    const long long K = a.front().at("config").at("episodes");
    for (const auto* side : {&a, &b})
        for (const auto& s : *side)
            if (s.at("env") != env || s.at("config").at("episodes") != K)
                throw invalid_input_error("compare: artifact sets differ in env or episodes");

    fs::create_directories(out_dir);
    auto csv = open_out(fs::path(out_dir) / "compare.csv");
    csv << "side,seed,agent,epsilon,total_regret,slope,slope_lo,slope_hi\n";
    auto side_json = [&](const std::vector<json>& side, const char* label) {
        std::vector<double> totals, slopes;
        std::map<double, long long> hist;
        for (const auto& s : side) {
            double total = s.at("regret").at("total");
            totals.push_back(total);
            const auto& slope = s.at("regret").at("slope");
            csv << label << ',' << s.at("seed") << ',' << s.at("agent").get<std::string>() << ','
                << fmt(s.at("epsilon")) << ',' << fmt(total);
            if (slope.is_null()) {
                csv << ",,,\n";
            } else {
                slopes.push_back(slope.at("slope"));
                csv << ',' << fmt(slope.at("slope")) << ',' << fmt(slope.at("lo")) << ','
                    << fmt(slope.at("hi")) << '\n';
            }
            for (const auto& stage : s.at("balls"))
                for (const auto& row : stage.at("histogram"))
                    hist[row.at("radius").get<double>()] += row.at("active").get<long long>();
        }
        json hist_rows = json::array();
        for (auto [radius, n] : hist) hist_rows.push_back({{"radius", radius}, {"active", n}});
        return json{{"dir", label},
                    {"agent", side.front().at("agent")},
                    {"runs", side.size()},
                    {"median_total", median(totals)},
                    {"median_slope", slopes.empty() ? json(nullptr) : json(median(slopes))},
                    {"histogram", hist_rows}};
    };
    json ja = side_json(a, "a");
    json jb = side_json(b, "b");
    json diff = nullptr;
    if (!ja.at("median_slope").is_null() && !jb.at("median_slope").is_null())
        diff = ja.at("median_slope").get<double>() - jb.at("median_slope").get<double>();
    json doc = {{"env", env}, {"episodes", K}, {"a", ja}, {"b", jb}, {"slope_a_minus_b", diff}};
    open_out(fs::path(out_dir) / "compare.json") << doc.dump(2) << '\n';
    return doc;
}

nlohmann::json dims(const std::string& env_name, int scale_count, double eps_grid,
                    const std::string& out_dir, int horizon_override, double lipschitz) {
    if (scale_count < 3 || scale_count > 12)
        throw invalid_input_error("dims: scale count out of range [3, 12]");
    if (!(eps_grid > 0.0 && eps_grid <= 1.0))
        throw invalid_input_error("dims: eps_grid out of range (0, 1]");
    auto environment = env::make_environment(env_name, horizon_override);
    auto spec = environment->metric();
    double L = lipschitz < 0.0 ? environment->lipschitz_hint() : lipschitz;
    auto oracle = env::build_oracle(*environment, eps_grid);

    std::vector<double> scales;
    for (int i = 1; i <= scale_count; ++i) scales.push_back(spec.d_max * std::ldexp(1.0, -i));

    fs::create_directories(out_dir);
    auto csv = open_out(fs::path(out_dir) / "dims.csv");
    csv << "kind,h,scale,count,exact\n";

    auto profile_json = [&](const diag::ScaleProfile& p, const char* kind, int h) {
        json counts = json::array(), exact = json::array();
        for (std::size_t i = 0; i < p.scales.size(); ++i) {
            counts.push_back(p.counts[i]);
            exact.push_back(static_cast<bool>(p.exact[i]));
            csv << kind << ',' << h << ',' << fmt(p.scales[i]) << ',' << p.counts[i] << ','
                << (p.exact[i] ? 1 : 0) << '\n';
        }
        return json{{"counts", counts},
                    {"exact", exact},
                    {"fit", fit_to_json(diag::dimension_fit(p.scales, p.counts))}};
    };

    json doc = {{"env", env_name},
                {"H", environment->horizon()},
                {"eps_grid", eps_grid},
                {"lipschitz", L},
                {"scales", scales}};
    doc["covering"] = profile_json(diag::covering_profile(oracle, scales, spec), "covering", 0);
    json zoom = json::array();
    for (int h = 1; h <= environment->horizon(); ++h) {
        json entry = profile_json(diag::zooming_profile(oracle, h, scales, spec, L), "zooming", h);
        entry["h"] = h;
        zoom.push_back(std::move(entry));
    }
    doc["zooming"] = std::move(zoom);
    open_out(fs::path(out_dir) / "dims.json") << doc.dump(2) << '\n';
    return doc;
}

}  // namespace aql::harness
