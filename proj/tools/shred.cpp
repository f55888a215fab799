#include "shred/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"SHRED: sparse-sensor full-state reconstruction pipeline"};
    app.require_subcommand(1);

    shred::PipelineOptions opt;
    const char* env_root = std::getenv("SHRED_WORKSPACE");
    opt.workspace_root = env_root ? env_root : "workspace";

    app.add_option("--config", opt.config_path, "experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--workspace", opt.workspace_root,
                   "workspace root (default $SHRED_WORKSPACE or ./workspace)");
    app.add_option("--seed", opt.seed, "master seed for the experiment");
    app.add_option("--jobs", opt.jobs, "worker threads for independent jobs")
        ->check(CLI::PositiveNumber);
    app.add_option("--set", opt.overrides, "config overrides, section.key=value")
        ->take_all();

    for (const char* name : {"generate", "compress", "train", "reconstruct", "evaluate",
                             "sweep", "all"})
        app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    try {
        shred::Pipeline pipeline = shred::Pipeline::from_options(opt);
        const std::string sub = app.get_subcommands().front()->get_name();
        std::cout << "workspace: " << pipeline.directory().string() << "\n";
        pipeline.run(sub);
        std::cout << sub << ": done\n";
    } catch (const shred::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
