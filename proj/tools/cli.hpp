#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "featdist/featdist.hpp"

namespace featdist::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2 };

namespace detail {

inline void emit(const std::string& text, const std::optional<std::filesystem::path>& out, std::ostream& stdout_) {
    if (!out) {
        stdout_ << text;
        return;
    }
    if (out->has_parent_path()) {
        std::filesystem::create_directories(out->parent_path());
    }
    std::ofstream file(*out, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw Error(ErrorKind::MissingFile, "cannot write " + out->string());
    }
    file << text;
}

} // namespace detail

/// Entry point shared by the featdist binary and the tests. Returns the
/// process exit code: 0 success, 1 validation failure, 2 numerical failure.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Frechet distance and kernel CKA between real and synthesized feature sets"};
    app.require_subcommand(1);

    std::string recipe_path;
    std::string out_path;
    std::string format;
    unsigned threads = default_thread_count();
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> sizes;
    std::optional<std::size_t> m;
    bool verbose = false;
    std::string report_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--recipe", recipe_path, "Recipe JSON file")->required();
        sub->add_option("--out", out_path, "Output file (default: recipe output or stdout)");
        sub->add_option("--format", format, "json | csv | table")->check(CLI::IsMember({"json", "csv", "table"}));
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "Override the recipe seed");
        sub->add_flag("-v,--verbose", verbose, "Log progress to stderr");
    };

    auto* evaluate = app.add_subcommand("evaluate", "Compute every configured metric for every cell");
    add_common(evaluate);
    auto* attack = app.add_subcommand("attack", "Histogram-matching attack: random vs. class-matched subsets");
    add_common(attack);
    attack->add_option("--m", m, "Subset size drawn from each pool");
    auto* sweep = app.add_subcommand("sweep", "Score increasing subsample sizes of the synthesized pool");
    add_common(sweep);
    sweep->add_option("--sizes", sizes, "Comma-separated subsample sizes")->delimiter(',');
    auto* report = app.add_subcommand("report", "Re-render an existing JSON report");
    report->add_option("input", report_path, "Report JSON file")->required();
    report->add_option("--out", out_path, "Output file (default: stdout)");
    report->add_option("--format", format, "json | csv | table")->check(CLI::IsMember({"json", "csv", "table"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg_out, msg_err;
        const int code = app.exit(e, msg_out, msg_err);
        out << msg_out.str();
        err << msg_err.str();
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (report->parsed()) {
            std::ifstream in(report_path, std::ios::binary);
            if (!in) {
                throw Error(ErrorKind::MissingFile, "cannot open report " + report_path);
            }
            std::stringstream buf;
            buf << in.rdbuf();
            const EvaluationReport parsed = parse_report(buf.str());
            const auto fmt = format.empty() ? ReportFormat::table : parse_format(format);
            detail::emit(render_report(parsed, fmt),
                         out_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_path), out);
            return kOk;
        }

        Recipe recipe = read_recipe(recipe_path);
        if (seed) recipe.seed = *seed;
        if (!format.empty()) recipe.format = parse_format(format);
        if (!out_path.empty()) recipe.output = out_path;
        if (m) recipe.attack_m = *m;
        if (!sizes.empty()) recipe.sweep_sizes = sizes;

        RunOptions opts;
        opts.threads = threads;
        opts.verbose = verbose;
        opts.log = &err;

        EvaluationReport result;
        if (evaluate->parsed()) {
            result = run_evaluate(recipe, opts);
        } else if (attack->parsed()) {
            result = run_attack(recipe, opts);
        } else {
            result = run_sweep(recipe, opts);
        }
        detail::emit(render_report(result, recipe.format), recipe.output, out);
        return kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_numerical(e.kind()) ? kNumerical : kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    }
}

} // namespace featdist::cli
