#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "netsnake/cli.hpp"

namespace {

using netsnake::Command;
using netsnake::RunConfig;

struct Sub {
    CLI::App* app = nullptr;
    std::string config_file;
    std::map<std::string, std::string> flags;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network-snake annotation refinement: fixtures, snake adjustment, toy training and metrics"};
    app.require_subcommand(1);

    const std::map<Command, std::string> about{
        {Command::SynthGen, "generate a synthetic fixture (field volume, truth and annotation graphs, manifest)"},
        {Command::Adjust, "run the snake on a volume and write the adjusted graph and per-step CSV"},
        {Command::TrainToy, "optimize a pixel field with the chosen training mode"},
        {Command::Metrics, "print correctness,completeness,quality,apls,tlts for two graphs or volumes"},
        {Command::ReproduceFig4, "train the gap fixture with full, fast and simple modes and write panels and fig4.csv"},
    };
    std::map<Command, Sub> subs;
    for (const auto& [cmd, text] : about) {
        auto& s = subs[cmd];
        s.app = app.add_subcommand(std::string(netsnake::command_name(cmd)), text);
        s.app->add_option("--config", s.config_file, "flat 'key = value' file; flags override it");
        for (const auto& key : RunConfig::keys()) {
            if (std::find(key.commands.begin(), key.commands.end(), cmd) == key.commands.end()) continue;
            auto* opt = s.app->add_option("--" + key.name, s.flags[key.name], key.help);
            opt->default_str(key.default_value);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return netsnake::kExitConfig;
    }

    for (auto& [cmd, s] : subs) {
        if (!s.app->parsed()) continue;
        return netsnake::run_guarded(
            [&, cmd = cmd] {
                RunConfig config;
                if (!s.config_file.empty()) config.load_file(s.config_file);
                for (const auto& [key, value] : s.flags)
                    if (s.app->count("--" + key) > 0) config.set(key, value);
                switch (cmd) {
                case Command::SynthGen: return netsnake::cmd_synth_gen(config, std::cerr);
                case Command::Adjust: return netsnake::cmd_adjust(config, std::cerr);
                case Command::TrainToy: return netsnake::cmd_train_toy(config, std::cerr);
                case Command::Metrics: return netsnake::cmd_metrics(config, std::cout);
                case Command::ReproduceFig4: return netsnake::cmd_reproduce_fig4(config, std::cerr);
                }
                return netsnake::kExitOther;
            },
            std::cerr);
    }
    return netsnake::kExitOther;
}
