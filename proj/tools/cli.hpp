#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltpsid/ltpsid.hpp"

#ifndef LTPSID_FIXTURE_DIR
#define LTPSID_FIXTURE_DIR ""
#endif

namespace ltpsid::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int { Ok = 0, ConfigError = 2, DataError = 3, NumericalFailure = 4 };

inline int exit_code_for(const Error& e)
{
    switch (e.category()) {
    case ErrorCategory::Validation: return ConfigError;
    case ErrorCategory::Data: return DataError;
    case ErrorCategory::Numerical: return NumericalFailure;
    }
    return NumericalFailure;
}

struct Settings {
    std::string model = "example1";
    std::optional<bool> normalize; // unset: normalize built-in fixtures only
    std::size_t N = 50;
    std::size_t J = 0; // 0 selects 10 P
    double sigma = 1.0;
    std::size_t q = 0;
    std::size_t r = 0;
    std::string order = "2"; // integer or "auto"
    double order_tol = 1e-8;
    std::size_t n_g = 50;
    std::size_t trials = 100;
    std::vector<std::size_t> N_grid{25, 50, 100, 200, 400};
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string burn_in = "auto";
    bool shared_input = false;
    std::string out;
    std::string data;
    std::string truth;
    std::string estimate;
    bool export_response = false;
};

/// Applies keys of a JSON config file onto settings. Unknown keys are rejected.
inline void apply_config(Settings& s, const json& j)
{
    if (!j.is_object()) {
        fail(ErrorCode::InvalidConfig, "config file must hold a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "model") s.model = value.get<std::string>();
            else if (key == "normalize") s.normalize = value.get<bool>();
            else if (key == "N") s.N = value.get<std::size_t>();
            else if (key == "J") s.J = value.get<std::size_t>();
            else if (key == "sigma") s.sigma = value.get<double>();
            else if (key == "q") s.q = value.get<std::size_t>();
            else if (key == "r") s.r = value.get<std::size_t>();
            else if (key == "order") s.order = value.is_string() ? value.get<std::string>() : std::to_string(value.get<std::size_t>());
            else if (key == "order_tol") s.order_tol = value.get<double>();
            else if (key == "n_g") s.n_g = value.get<std::size_t>();
            else if (key == "trials") s.trials = value.get<std::size_t>();
            else if (key == "N_grid") s.N_grid = value.get<std::vector<std::size_t>>();
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else if (key == "jobs") s.jobs = value.get<std::size_t>();
            else if (key == "burn_in") s.burn_in = value.is_string() ? value.get<std::string>() : std::to_string(value.get<std::size_t>());
            else if (key == "shared_input") s.shared_input = value.get<bool>();
            else if (key == "out") s.out = value.get<std::string>();
            else fail(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
        } catch (const json::exception& e) {
            fail(ErrorCode::InvalidConfig, "config key '" + key + "': " + e.what());
        }
    }
}

inline OrderSpec order_spec(const Settings& s)
{
    if (s.order == "auto") {
        return OrderSpec::threshold(s.order_tol);
    }
    std::size_t pos = 0;
    long long n = 0;
    try {
        n = std::stoll(s.order, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.order.size() || n < 1) {
        fail(ErrorCode::InvalidConfig, "--order must be a positive integer or 'auto'");
    }
    return OrderSpec::known(static_cast<Index>(n));
}

inline SteadyStateOptions steady_state(const Settings& s)
{
    SteadyStateOptions options;
    if (s.burn_in != "auto") {
        try {
            options.burn_in = static_cast<std::size_t>(std::stoull(s.burn_in));
        } catch (const std::exception&) {
            fail(ErrorCode::InvalidConfig, "--burn-in must be a count or 'auto'");
        }
    }
    return options;
}

/// Stored normalized fixture, when the source tree's fixtures/ directory is available.
inline void check_stored_fixture(const std::string& name, const LtpModel& normalized)
{
    const fs::path stored = fs::path(LTPSID_FIXTURE_DIR) / (name + ".json");
    if (std::string(LTPSID_FIXTURE_DIR).empty() || !fs::exists(stored)) {
        return;
    }
    const LtpModel reference = io::load_model(stored);
    const double diff = impulse_response_table(reference, 50).max_abs_difference(impulse_response_table(normalized, 50));
    bool same = reference.period() == normalized.period();
    for (std::size_t t = 0; same && t < reference.period(); ++t) {
        same = (reference.B_seq()[t] - normalized.B_seq()[t]).cwiseAbs().maxCoeff() <= 1e-12
               && (reference.A_seq()[t] - normalized.A_seq()[t]).cwiseAbs().maxCoeff() <= 1e-12;
    }
    if (!same || diff > 1e-12) {
        fail(ErrorCode::NumericalError, "recomputed normalization of '" + name + "' disagrees with " + stored.string());
    }
}

inline LtpModel load_model_source(const std::string& source, std::optional<bool> normalize)
{
    const bool is_fixture = fixtures::by_name(source, false).has_value();
    if (is_fixture) {
        const bool norm = normalize.value_or(true) && source != "lti";
        LtpModel model = *fixtures::by_name(source, norm);
        if (norm) {
            check_stored_fixture(source, model);
        }
        return model;
    }
    LtpModel model = io::load_model(source);
    return normalize.value_or(false) ? normalize_gain(model) : model;
}

inline StudyConfig study_config(const Settings& s)
{
    StudyConfig c;
    c.J = s.J;
    c.N = s.N;
    c.sigma = s.sigma;
    c.trials = s.trials;
    c.q = s.q;
    c.r = s.r;
    c.order = order_spec(s);
    c.n_g = s.n_g;
    c.seed = s.seed;
    c.jobs = std::max<std::size_t>(1, s.jobs);
    c.steady_state = steady_state(s);
    return c;
}

inline fs::path output_dir(const Settings& s)
{
    if (!s.out.empty()) {
        return s.out;
    }
    if (const char* env = std::getenv("LTPSID_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "ltpsid_out";
}

inline int cmd_simulate(const Settings& s, std::ostream& out)
{
    const LtpModel model = load_model_source(s.model, s.normalize);
    EnsembleOptions options;
    options.J = s.J ? s.J : 10 * model.period();
    options.N = s.N;
    options.sigma = s.sigma;
    options.master_seed = s.seed;
    options.steady_state = steady_state(s);
    options.shared_input = s.shared_input;
    const Ensemble ensemble = collect_ensemble(model, options);
    const fs::path dir = output_dir(s);
    io::write_ensemble(ensemble, dir, s.seed);
    out << "wrote " << ensemble.size() << " experiments of length " << ensemble.record_length() << " to "
        << dir.string() << "\n";
    return Ok;
}

inline int cmd_identify(const Settings& s, std::ostream& out)
{
    if (s.data.empty()) {
        fail(ErrorCode::InvalidConfig, "--data is required");
    }
    const Ensemble ensemble = io::read_ensemble(s.data);
    IdentifyOptions options;
    options.q = s.q;
    options.r = s.r;
    options.order = order_spec(s);
    const auto result = identify(ensemble, options);
    const fs::path dir = output_dir(s);
    io::save_model(result.model, dir / "model.json");
    io::write_file(dir / "diagnostics.json", io::diagnostics_to_json(result).dump(2) + "\n");
    if (s.export_response) {
        const auto response = etfe(assemble_spectra(ensemble));
        io::write_file(dir / "frequency_response.csv", io::frequency_response_to_csv(response));
    }
    out << "order " << result.order_used << (result.order_ambiguous ? " (ambiguous across tau)" : "") << "\n";
    out << "wrote " << (dir / "model.json").string() << "\n";
    return Ok;
}

inline int cmd_evaluate(const Settings& s, std::ostream& out)
{
    if (s.estimate.empty()) {
        fail(ErrorCode::InvalidConfig, "--est is required");
    }
    const LtpModel truth = load_model_source(s.truth.empty() ? s.model : s.truth, s.normalize);
    const LtpModel estimate = io::load_model(s.estimate);
    const FitReport report = fit_metric(truth, estimate, s.n_g);
    const fs::path dir = output_dir(s);
    io::write_file(dir / "fit.csv", io::fit_report_to_csv(report));
    const json summary{{"W", report.W}, {"mse", report.mse}, {"n_g", report.n_g},
                       {"max_abs_error", report.errors.maxCoeff()}};
    io::write_file(dir / "fit.json", summary.dump(2) + "\n");
    out << "W " << io::format_double(report.W) << " MSE " << io::format_double(report.mse) << "\n";
    return Ok;
}

inline int cmd_montecarlo(const Settings& s, std::ostream& out)
{
    const LtpModel model = load_model_source(s.model, s.normalize);
    const auto result = monte_carlo(model, study_config(s));
    const fs::path dir = output_dir(s);
    io::write_file(dir / "montecarlo_trials.csv", io::trials_to_csv(result.trials));
    json summary = io::summary_to_json(result.W);
    summary["model"] = s.model;
    summary["seed"] = s.seed;
    io::write_file(dir / "montecarlo_summary.json", summary.dump(2) + "\n");
    for (const auto& t : result.trials) {
        if (t.failed) {
            out << "trial " << t.index << " failed: " << t.failure << "\n";
        }
    }
    out << "W median " << io::format_double(result.W.median) << " [" << io::format_double(result.W.q1) << ", "
        << io::format_double(result.W.q3) << "], failures " << result.W.failures << "/" << result.W.trials << "\n";
    return result.W.config_failed ? NumericalFailure : Ok;
}

inline int cmd_sweep(const Settings& s, std::ostream& out)
{
    const LtpModel model = load_model_source(s.model, s.normalize);
    const auto result = consistency_sweep(model, s.N_grid, study_config(s));
    const fs::path dir = output_dir(s);
    io::write_file(dir / "sweep.csv", io::sweep_to_csv(result));
    io::write_file(dir / "sweep_summary.json", io::sweep_to_json(result).dump(2) + "\n");
    out << "slope " << io::format_double(result.slope) << "\n";
    return Ok;
}

inline int cmd_fixtures(const Settings& s, std::ostream& out)
{
    const fs::path dir = output_dir(s);
    for (const auto name : {"example1", "example2"}) {
        io::save_model(*fixtures::by_name(name, false), dir / (std::string(name) + "_raw.json"));
        io::save_model(*fixtures::by_name(name, true), dir / (std::string(name) + ".json"));
    }
    io::save_model(fixtures::first_order_lti(), dir / "lti.json");
    out << "wrote fixtures to " << dir.string() << "\n";
    return Ok;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Frequency-domain subspace identification of linear time-periodic systems", "ltpsid"};
    app.require_subcommand(1);
    app.fallthrough();

    Settings flags;
    std::string config_path;
    std::string burn_in;
    bool raw = false;
    bool normalize = false;
    std::string Ns;

    auto* seed_opt = app.add_option("--seed", flags.seed, "Master seed");
    auto* out_opt = app.add_option("--out", flags.out, "Output directory (default $LTPSID_OUT or ./ltpsid_out)");
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    auto* jobs_opt = app.add_option("--jobs", flags.jobs, "Parallel trials")->check(CLI::PositiveNumber);

    std::vector<CLI::Option*> tracked;
    auto add_model_flags = [&](CLI::App* sub) {
        tracked.push_back(sub->add_option("--model", flags.model, "example1 | example2 | lti | path to model JSON"));
        sub->add_flag("--raw", raw, "Use the fixture without gain normalization");
        sub->add_flag("--normalize", normalize, "Normalize the model to unit mean DC gain");
    };
    auto add_data_flags = [&](CLI::App* sub) {
        tracked.push_back(sub->add_option("--N", flags.N, "Periods per record")->check(CLI::PositiveNumber));
        tracked.push_back(sub->add_option("--J", flags.J, "Experiments (default 10 P)"));
        tracked.push_back(sub->add_option("--sigma", flags.sigma, "Output noise standard deviation")->check(CLI::NonNegativeNumber));
        tracked.push_back(sub->add_option("--burn-in", flags.burn_in, "Pattern repetitions before recording, or auto"));
    };
    auto add_id_flags = [&](CLI::App* sub) {
        tracked.push_back(sub->add_option("--q", flags.q, "Hankel block rows (default (NP+1)/2)"));
        tracked.push_back(sub->add_option("--r", flags.r, "Hankel block columns (default (NP+1)/2)"));
        tracked.push_back(sub->add_option("--order", flags.order, "Model order or auto"));
        tracked.push_back(sub->add_option("--order-tol", flags.order_tol, "Relative singular value threshold for --order auto"));
    };
    auto add_eval_flags = [&](CLI::App* sub) {
        tracked.push_back(sub->add_option("--ng", flags.n_g, "Impulse response horizon")->check(CLI::PositiveNumber));
    };

    auto* simulate = app.add_subcommand("simulate", "Generate an ensemble of periodic experiments");
    add_model_flags(simulate);
    add_data_flags(simulate);
    simulate->add_flag("--shared-input", flags.shared_input, "Reuse one input pattern for every experiment");

    auto* identify_cmd = app.add_subcommand("identify", "Identify an LTP model from an ensemble");
    tracked.push_back(identify_cmd->add_option("--data", flags.data, "Ensemble manifest or directory")->required());
    add_id_flags(identify_cmd);
    identify_cmd->add_flag("--export-response", flags.export_response, "Also write the lifted ETFE as CSV");

    auto* evaluate = app.add_subcommand("evaluate", "Score an estimated model against the true one");
    tracked.push_back(evaluate->add_option("--true", flags.truth, "True model (fixture name or path)"));
    tracked.push_back(evaluate->add_option("--est", flags.estimate, "Estimated model JSON")->required());
    evaluate->add_flag("--raw", raw, "Use the fixture without gain normalization");
    add_eval_flags(evaluate);

    auto* montecarlo = app.add_subcommand("montecarlo", "Monte Carlo study of the fit metric");
    add_model_flags(montecarlo);
    add_data_flags(montecarlo);
    add_id_flags(montecarlo);
    add_eval_flags(montecarlo);
    tracked.push_back(montecarlo->add_option("--trials", flags.trials, "Number of trials")->check(CLI::PositiveNumber));

    auto* sweep = app.add_subcommand("sweep", "Impulse-response MSE against record length");
    add_model_flags(sweep);
    add_data_flags(sweep);
    add_id_flags(sweep);
    add_eval_flags(sweep);
    tracked.push_back(sweep->add_option("--trials", flags.trials, "Trials per N")->check(CLI::PositiveNumber));
    sweep->add_option("--Ns", Ns, "Comma-separated record lengths, e.g. 25,50,100");

    auto* fixtures_cmd = app.add_subcommand("fixtures", "Write the built-in models as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? Ok : ConfigError;
    }

    try {
        Settings s;
        if (!config_path.empty()) {
            apply_config(s, io::parse_json(io::read_file(config_path), config_path));
        }
        // Explicit flags win over the config file.
        auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
        if (given(seed_opt)) s.seed = flags.seed;
        if (given(out_opt)) s.out = flags.out;
        if (given(jobs_opt)) s.jobs = flags.jobs;
        for (const CLI::Option* o : tracked) {
            if (!given(o)) {
                continue;
            }
            const std::string name = o->get_name();
            if (name == "--model") s.model = flags.model;
            else if (name == "--N") s.N = flags.N;
            else if (name == "--J") s.J = flags.J;
            else if (name == "--sigma") s.sigma = flags.sigma;
            else if (name == "--burn-in") s.burn_in = flags.burn_in;
            else if (name == "--q") s.q = flags.q;
            else if (name == "--r") s.r = flags.r;
            else if (name == "--order") s.order = flags.order;
            else if (name == "--order-tol") s.order_tol = flags.order_tol;
            else if (name == "--ng") s.n_g = flags.n_g;
            else if (name == "--trials") s.trials = flags.trials;
            else if (name == "--data") s.data = flags.data;
            else if (name == "--true") s.truth = flags.truth;
            else if (name == "--est") s.estimate = flags.estimate;
        }
        if (raw && normalize) {
            fail(ErrorCode::InvalidConfig, "--raw and --normalize are mutually exclusive");
        }
        if (raw) s.normalize = false;
        if (normalize) s.normalize = true;
        if (flags.shared_input) s.shared_input = true;
        if (flags.export_response) s.export_response = true;
        if (!Ns.empty()) {
            s.N_grid.clear();
            for (const auto field : io::split(Ns, ',')) {
                double v = 0.0;
                try {
                    v = io::parse_double(field, "--Ns");
                } catch (const Error&) {
                    v = 0.0;
                }
                if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
                    fail(ErrorCode::InvalidConfig, "--Ns entries must be positive integers");
                }
                s.N_grid.push_back(static_cast<std::size_t>(v));
            }
        }

        if (simulate->parsed()) return cmd_simulate(s, out);
        if (identify_cmd->parsed()) return cmd_identify(s, out);
        if (evaluate->parsed()) return cmd_evaluate(s, out);
        if (montecarlo->parsed()) return cmd_montecarlo(s, out);
        if (sweep->parsed()) return cmd_sweep(s, out);
        if (fixtures_cmd->parsed()) return cmd_fixtures(s, out);
        return ConfigError;
    } catch (const Error& e) {
        err << "error: " << e.describe() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return DataError;
    }
}

} // namespace ltpsid::cli
