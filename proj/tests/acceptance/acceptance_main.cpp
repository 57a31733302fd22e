#include "occlab/acceptance.hpp"
#include "occlab/errors.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char **argv)
{
    CLI::App app{"occlab acceptance suite"};
    occlab::AcceptanceOptions opts;
    std::vector<int> only;
    std::string out_dir;
    app.add_option("--seed", opts.seed, "base seed");
    app.add_option("--workers", opts.workers, "worker threads (0 = all cores)");
    app.add_option("--repeat-workers", opts.repeat_workers, "worker threads for the determinism re-run");
    app.add_option("--only", only, "criteria to run")->check(CLI::Range(1, 11));
    app.add_option("--out", out_dir, "directory for per-criterion records");
    CLI11_PARSE(app, argc, argv);
    opts.only.insert(only.begin(), only.end());
    opts.progress = &std::cerr;

    try {
        const auto results = occlab::run_acceptance(opts);
        for (const auto &r : results)
            std::cout << occlab::format_result(r) << '\n';
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            for (const auto &r : results)
                occlab::write_csv(r.record, std::filesystem::path(out_dir) / ("criterion_" + r.label + ".csv"));
        }
        const bool ok = occlab::all_passed(results);
        std::cout << (ok ? "all criteria passed" : "some criteria failed") << '\n';
        return ok ? 0 : 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
