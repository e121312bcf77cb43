#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "keiter/runner.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Bergman-kernel iteration lab"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    double tol = 0.0;
    unsigned threads = 1;
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("--config", config, "config file (JSON, comments allowed)")->required();
    run->add_option("--out-dir", out_dir, "output directory, overrides output_dir");
    auto* tol_opt = run->add_option("--tol-override", tol, "replaces numeric.check_tol and variation.tol");
    run->add_option("--threads", threads, "worker threads for scans")->check(CLI::PositiveNumber);

    std::vector<std::string> dirs;
    std::string report_out;
    auto* rep = app.add_subcommand("report", "merge manifests of run directories");
    rep->add_option("dirs", dirs, "run directories");
    rep->add_option("--out-dir", report_out, "write report.csv and report.json here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            keiter::cli::RunOptions ro;
            if (!out_dir.empty()) ro.out_dir = out_dir;
            if (*tol_opt) ro.tol_override = tol;
            ro.threads = threads;
            auto res = keiter::cli::run(keiter::cli::load_config(config), ro);
            for (const auto& c : res.checks)
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << keiter::io::fmt(c.value) << " tol="
                          << keiter::io::fmt(c.tol) << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
            std::cout << "wrote " << res.out_dir.string() << "/manifest.json\n";
            return res.exit_code;
        }
        std::vector<fs::path> paths(dirs.begin(), dirs.end());
        auto r = keiter::cli::report(paths);
        if (report_out.empty()) {
            std::cout << r.csv();
        } else {
            fs::create_directories(report_out);
            keiter::io::write_file(fs::path(report_out) / "report.csv", r.csv());
            keiter::io::write_file(fs::path(report_out) / "report.json", r.to_json().dump(2) + "\n");
        }
        return 0;
    } catch (const keiter::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == keiter::Errc::config_invalid || e.code() == keiter::Errc::missing_manifest ||
                       e.code() == keiter::Errc::io_error
                   ? 1
                   : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
