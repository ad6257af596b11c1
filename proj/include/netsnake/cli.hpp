#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "netsnake/field_model.hpp"
#include "netsnake/metrics.hpp"
#include "netsnake/snake.hpp"
#include "netsnake/synth.hpp"

namespace netsnake {

enum class Command { SynthGen, Adjust, TrainToy, Metrics, ReproduceFig4 };

[[nodiscard]] std::string_view command_name(Command c) noexcept;

/// Flat `key = value` configuration. Every key has a default; unknown keys and
/// duplicate keys within one file are rejected with ConfigError.
class RunConfig {
public:
    struct Key {
        std::string name;
        std::string default_value;
        std::string help;
        std::vector<Command> commands;
    };
    [[nodiscard]] static const std::vector<Key>& keys();

    RunConfig();

    void set(std::string_view key, std::string value);
    /// Parses `key = value` lines; '#' starts a comment. `origin` names the source in errors.
    void merge_text(std::string_view text, std::string_view origin = "config");
    void load_file(const std::filesystem::path& path);

    [[nodiscard]] const std::string& get(std::string_view key) const;
    [[nodiscard]] double number(std::string_view key) const;
    [[nodiscard]] int integer(std::string_view key) const;
    [[nodiscard]] std::uint64_t unsigned_integer(std::string_view key) const;

    [[nodiscard]] SnakeParams snake() const;
    [[nodiscard]] TrainConfig train() const;
    [[nodiscard]] Fig4Params fig4() const;
    [[nodiscard]] TreeParams tree() const;
    [[nodiscard]] PathMetricParams path_metrics() const;

private:
    std::map<std::string, std::string, std::less<>> values_;
};

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitOther = 1;

[[nodiscard]] int exit_code_for(const std::exception& e) noexcept;

/// Runs `body`, printing any exception to `err` and mapping it to an exit code.
int run_guarded(const std::function<int()>& body, std::ostream& err);

int cmd_synth_gen(const RunConfig& config, std::ostream& log);
int cmd_adjust(const RunConfig& config, std::ostream& log);
int cmd_train_toy(const RunConfig& config, std::ostream& log);
/// Prints one CSV row (columns as kMetricsCsvHeader) to `out`.
int cmd_metrics(const RunConfig& config, std::ostream& out);
int cmd_reproduce_fig4(const RunConfig& config, std::ostream& log);

/// One row of fig4.csv.
struct Fig4Row {
    std::string mode;
    int steps = 0;
    double seconds_per_step = 0.0;
    double initial_error = 0.0;
    double final_error = 0.0;
    double initial_gap_min = 0.0;
    double gap_max = 0.0;
    double arc_length = 0.0;
    double truth_length = 0.0;
    double final_loss = 0.0;
};

inline constexpr const char* kFig4CsvHeader =
    "mode,steps,seconds_per_step,initial_error,final_error,initial_gap_min,gap_max,arc_length,truth_length,final_loss";

/// Reads fig4.csv back; throws IoError on a malformed file.
[[nodiscard]] std::vector<Fig4Row> read_fig4_csv(const std::filesystem::path& path);

} // namespace netsnake
