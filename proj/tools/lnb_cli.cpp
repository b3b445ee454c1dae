#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lnb/config.hpp"
#include "lnb/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Boundary blowup solutions of Δu = c u^p near singular boundary points"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::vector<std::string> cases;
    int jobs = 0;
    std::string out;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"profile", "solve the cone profile on the spherical cross-section"},
        {"eigen", "first eigenpair of the linearised profile operator"},
        {"solve", "truncated blowup solutions on the 2-D reduction"},
        {"certify", "sampled barrier certificates"},
        {"verify", "measure the convergence rate against the tangent cone"},
        {"report", "collect theorem rows and certificates into report.md"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "experiment INI file")->required()->check(CLI::ExistingFile);
        sub->add_option("--case", cases, "restrict to these case labels");
        sub->add_option("-j,--jobs", jobs, "worker threads (overrides [run] jobs)")->check(CLI::PositiveNumber);
        sub->add_option("-o,--out", out, "output directory (overrides [run] output)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : int(lnb::ExitCode::bad_config);
    }

    try {
        auto cfg = lnb::load_config(config_path);
        if (!out.empty()) cfg.output = out;
        const auto cmd = lnb::parse_subcommand(app.get_subcommands().front()->get_name());
        return lnb::run(cmd, cfg, cases, jobs > 0 ? jobs : cfg.jobs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return lnb::exit_code_of(std::current_exception());
    }
}
