#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltpsid/eval.hpp"
#include "ltpsid/model.hpp"
#include "ltpsid/signal.hpp"
#include "ltpsid/subspace.hpp"

namespace ltpsid::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest representation that parses back to the same double.
inline std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        fail(ErrorCode::ParseError, where + ": '" + std::string(text) + "' is not a number");
    }
    return value;
}

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view contents)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out << contents;
    if (!out) {
        fail(ErrorCode::IoError, "write failed for " + path.string());
    }
}

inline json parse_json(const std::string& text, const std::string& where)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, where + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Model files

inline json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, Index rows, Index cols, const std::string& where)
{
    if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
        fail(ErrorCode::ParseError, where + ": expected " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            fail(ErrorCode::ParseError, where + " row " + std::to_string(i) + ": expected " + std::to_string(cols)
                                            + " columns");
        }
        for (Index k = 0; k < cols; ++k) {
            const json& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number()) {
                fail(ErrorCode::ParseError, where + "(" + std::to_string(i) + "," + std::to_string(k)
                                                + "): not a number");
            }
            m(i, k) = v.get<double>();
        }
    }
    return m;
}

inline json model_to_json(const LtpModel& model)
{
    json j;
    j["P"] = model.period();
    j["nx"] = model.nx();
    j["ny"] = model.ny();
    j["nu"] = model.nu();
    for (const char* key : {"A", "B", "C"}) {
        j[key] = json::array();
    }
    for (std::size_t t = 0; t < model.period(); ++t) {
        j["A"].push_back(matrix_to_json(model.A_seq()[t]));
        j["B"].push_back(matrix_to_json(model.B_seq()[t]));
        j["C"].push_back(matrix_to_json(model.C_seq()[t]));
    }
    return j;
}

inline LtpModel model_from_json(const json& j, const std::string& where = "model")
{
    auto dim = [&](const char* key) -> Index {
        if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<std::int64_t>() < 1) {
            fail(ErrorCode::ParseError, where + ": '" + key + "' must be a positive integer");
        }
        return j[key].get<Index>();
    };
    const auto P = static_cast<std::size_t>(dim("P"));
    const Index nx = dim("nx");
    const Index ny = dim("ny");
    const Index nu = dim("nu");
    auto seq = [&](const char* key, Index rows, Index cols) {
        if (!j.contains(key) || !j[key].is_array()) {
            fail(ErrorCode::ParseError, where + ": '" + key + "' must be an array of matrices");
        }
        if (j[key].size() != P) {
            fail(ErrorCode::DimensionMismatch, where + ": '" + key + "' holds " + std::to_string(j[key].size())
                                                   + " matrices, P = " + std::to_string(P));
        }
        std::vector<Matrix> out;
        for (std::size_t t = 0; t < P; ++t) {
            out.push_back(matrix_from_json(j[key][t], rows, cols, where + "." + key + "[" + std::to_string(t) + "]"));
        }
        return out;
    };
    return LtpModel(seq("A", nx, nx), seq("B", nx, nu), seq("C", ny, nx));
}

inline LtpModel load_model(const fs::path& path)
{
    return model_from_json(parse_json(read_file(path), path.string()), path.string());
}

inline void save_model(const LtpModel& model, const fs::path& path)
{
    // One key per line, each value on a single line.
    const json j = model_to_json(model);
    std::string text = "{\n";
    std::size_t i = 0;
    for (const auto& [key, value] : j.items()) {
        text += "  " + json(key).dump() + ": " + value.dump() + (++i < j.size() ? ",\n" : "\n");
    }
    write_file(path, text + "}\n");
}

// ---------------------------------------------------------------------------
// Ensembles: one CSV per experiment (t, u_1..u_nu, y_1..y_ny) plus manifest.json

inline std::string experiment_to_csv(const Experiment& e)
{
    std::string out = "t";
    for (Index c = 0; c < e.input.rows(); ++c) {
        out += ",u_" + std::to_string(c + 1);
    }
    for (Index c = 0; c < e.output.rows(); ++c) {
        out += ",y_" + std::to_string(c + 1);
    }
    out += '\n';
    for (Index t = 0; t < e.input.cols(); ++t) {
        out += std::to_string(t);
        for (Index c = 0; c < e.input.rows(); ++c) {
            out += ',' + format_double(e.input(c, t));
        }
        for (Index c = 0; c < e.output.rows(); ++c) {
            out += ',' + format_double(e.output(c, t));
        }
        out += '\n';
    }
    return out;
}

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return fields;
}

inline Experiment experiment_from_csv(const std::string& text, Index nu, Index ny, std::size_t length,
                                      const std::string& name)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    const auto width = static_cast<std::size_t>(1 + nu + ny);
    auto where = [&] { return name + ":" + std::to_string(line_no); };
    if (!std::getline(in, line)) {
        fail(ErrorCode::ParseError, name + ": empty file");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (split(line, ',').size() != width) {
        fail(ErrorCode::ParseError, where() + ": header has " + std::to_string(split(line, ',').size())
                                        + " columns, expected " + std::to_string(width));
    }
    Experiment e;
    e.input.resize(nu, static_cast<Index>(length));
    e.output.resize(ny, static_cast<Index>(length));
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != width) {
            fail(ErrorCode::ParseError, where() + ": expected " + std::to_string(width) + " fields, found "
                                            + std::to_string(fields.size()));
        }
        if (rows >= length) {
            fail(ErrorCode::ParseError, where() + ": more than " + std::to_string(length) + " samples");
        }
        const double t = parse_double(fields[0], where());
        if (t != static_cast<double>(rows)) {
            fail(ErrorCode::ParseError, where() + ": expected t = " + std::to_string(rows));
        }
        for (Index c = 0; c < nu; ++c) {
            e.input(c, static_cast<Index>(rows)) = parse_double(fields[static_cast<std::size_t>(1 + c)], where());
        }
        for (Index c = 0; c < ny; ++c) {
            e.output(c, static_cast<Index>(rows)) = parse_double(fields[static_cast<std::size_t>(1 + nu + c)], where());
        }
        ++rows;
    }
    if (rows != length) {
        fail(ErrorCode::ParseError, name + ": found " + std::to_string(rows) + " samples, expected "
                                        + std::to_string(length));
    }
    return e;
}

inline std::string experiment_file_name(std::size_t i)
{
    std::string digits = std::to_string(i);
    return "experiment_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits + ".csv";
}

inline void write_ensemble(const Ensemble& ensemble, const fs::path& dir, std::uint64_t master_seed)
{
    fs::create_directories(dir);
    json manifest;
    manifest["P"] = ensemble.period;
    manifest["N"] = ensemble.periods_per_record;
    manifest["J"] = ensemble.size();
    manifest["nu"] = ensemble.nu();
    manifest["ny"] = ensemble.ny();
    manifest["sigma"] = ensemble.experiments.empty() ? 0.0 : ensemble.experiments[0].meta.sigma;
    manifest["master_seed"] = master_seed;
    manifest["files"] = json::array();
    manifest["seeds"] = json::array();
    manifest["burn_in"] = json::array();
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const auto& e = ensemble.experiments[i];
        const std::string name = experiment_file_name(i);
        write_file(dir / name, experiment_to_csv(e));
        manifest["files"].push_back(name);
        manifest["seeds"].push_back({{"input", e.meta.input_seed}, {"noise", e.meta.noise_seed}});
        manifest["burn_in"].push_back(e.meta.burn_in_periods);
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Accepts either the manifest path or the directory holding manifest.json.
inline Ensemble read_ensemble(fs::path path)
{
    if (fs::is_directory(path)) {
        path /= "manifest.json";
    }
    const json manifest = parse_json(read_file(path), path.string());
    auto count = [&](const char* key) -> std::size_t {
        if (!manifest.contains(key) || !manifest[key].is_number_unsigned() || manifest[key].get<std::size_t>() < 1) {
            fail(ErrorCode::ParseError, path.string() + ": '" + key + "' must be a positive integer");
        }
        return manifest[key].get<std::size_t>();
    };
    Ensemble ensemble;
    ensemble.period = count("P");
    ensemble.periods_per_record = count("N");
    const std::size_t J = count("J");
    const auto nu = static_cast<Index>(count("nu"));
    const auto ny = static_cast<Index>(count("ny"));
    const double sigma = manifest.value("sigma", 0.0);
    if (!manifest.contains("files") || !manifest["files"].is_array() || manifest["files"].size() != J) {
        fail(ErrorCode::ParseError, path.string() + ": 'files' must list J experiment files");
    }
    const fs::path dir = path.parent_path();
    for (std::size_t i = 0; i < J; ++i) {
        const std::string name = manifest["files"][i].get<std::string>();
        Experiment e = experiment_from_csv(read_file(dir / name), nu, ny, ensemble.record_length(),
                                           (dir / name).string());
        e.meta.sigma = sigma;
        if (manifest.contains("seeds") && manifest["seeds"].size() == J) {
            e.meta.input_seed = manifest["seeds"][i].value("input", std::uint64_t{0});
            e.meta.noise_seed = manifest["seeds"][i].value("noise", std::uint64_t{0});
        }
        if (manifest.contains("burn_in") && manifest["burn_in"].size() == J) {
            e.meta.burn_in_periods = manifest["burn_in"][i].get<std::size_t>();
        }
        ensemble.experiments.push_back(std::move(e));
    }
    return ensemble;
}

// ---------------------------------------------------------------------------
// Frequency responses and identification diagnostics

inline std::string frequency_response_to_csv(const LiftedFrequencyResponse& response)
{
    std::string out = "k,omega,l,m,output,input,real,imag\n";
    const auto P = response.period;
    for (std::size_t k = 0; k < response.grid_size(); ++k) {
        for (std::size_t l = 0; l < P; ++l) {
            for (std::size_t m = 0; m < P; ++m) {
                const CMatrix block = response.block(k, l, m);
                for (Index i = 0; i < block.rows(); ++i) {
                    for (Index j = 0; j < block.cols(); ++j) {
                        out += std::to_string(k) + ',' + format_double(response.frequency(k)) + ','
                               + std::to_string(l) + ',' + std::to_string(m) + ',' + std::to_string(i + 1) + ','
                               + std::to_string(j + 1) + ',' + format_double(block(i, j).real()) + ','
                               + format_double(block(i, j).imag()) + '\n';
                    }
                }
            }
        }
    }
    return out;
}

inline json frequency_response_to_json(const LiftedFrequencyResponse& response)
{
    json j;
    j["P"] = response.period;
    j["ny"] = response.ny;
    j["nu"] = response.nu;
    j["N"] = response.grid_size();
    j["values"] = json::array();
    for (std::size_t k = 0; k < response.grid_size(); ++k) {
        j["values"].push_back({{"k", k},
                               {"omega", response.frequency(k)},
                               {"real", matrix_to_json(response.values[k].real())},
                               {"imag", matrix_to_json(response.values[k].imag())}});
    }
    return j;
}

inline json diagnostics_to_json(const IdentificationResult& result)
{
    json j;
    j["order_used"] = result.order_used;
    j["order_ambiguous"] = result.order_ambiguous;
    j["order_counts"] = result.order_counts;
    j["q"] = result.q;
    j["r"] = result.r;
    j["b_residual"] = result.b_residual;
    j["max_imaginary_residue"] = result.max_imaginary_residue;
    j["max_reconstruction_error"] = result.reconstruction_error.size() ? result.reconstruction_error.maxCoeff() : 0.0;
    j["singular_values"] = json::array();
    for (const auto& s : result.singular_values) {
        j["singular_values"].push_back(std::vector<double>(s.data(), s.data() + s.size()));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Study reports

inline json summary_to_json(const Summary& s)
{
    return {{"trials", s.trials}, {"failures", s.failures}, {"config_failed", s.config_failed},
            {"min", s.min},       {"q1", s.q1},             {"median", s.median},
            {"q3", s.q3},         {"max", s.max},           {"mean", s.mean}};
}

inline std::string trials_to_csv(const std::vector<TrialOutcome>& trials)
{
    std::string out = "trial,seed,W,MSE,failed\n";
    for (const auto& t : trials) {
        out += std::to_string(t.index) + ',' + std::to_string(t.seed) + ','
               + (t.failed ? std::string("nan") : format_double(t.W)) + ','
               + (t.failed ? std::string("nan") : format_double(t.mse)) + ',' + (t.failed ? "1" : "0") + '\n';
    }
    return out;
}

inline std::string fit_report_to_csv(const FitReport& report)
{
    std::string out = "tau,r,abs_error\n";
    for (Index t = 0; t < report.errors.rows(); ++t) {
        for (Index r = 0; r < report.errors.cols(); ++r) {
            out += std::to_string(t) + ',' + std::to_string(r + 1) + ',' + format_double(report.errors(t, r)) + '\n';
        }
    }
    return out;
}

inline std::string sweep_to_csv(const SweepResult& sweep)
{
    std::string out = "N,trial,seed,MSE,failed\n";
    for (std::size_t i = 0; i < sweep.N_grid.size(); ++i) {
        for (const auto& t : sweep.trials[i]) {
            out += std::to_string(sweep.N_grid[i]) + ',' + std::to_string(t.index) + ',' + std::to_string(t.seed)
                   + ',' + (t.failed ? std::string("nan") : format_double(t.mse)) + ',' + (t.failed ? "1" : "0")
                   + '\n';
        }
    }
    return out;
}

inline json sweep_to_json(const SweepResult& sweep)
{
    json j;
    j["N_grid"] = sweep.N_grid;
    j["median_mse"] = sweep.median_mse;
    j["failures"] = sweep.failures;
    j["slope"] = sweep.slope;
    return j;
}

} // namespace ltpsid::io
