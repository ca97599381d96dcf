#pragma once

// Experiment configuration, the correlation-kind x variance x modes x
// transfer matrix runner, result persistence and PINN/FDM comparison.
// The config grammar is documented in docs/config.md.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "darcynas/fdm.hpp"
#include "darcynas/pinn.hpp"
#include "darcynas/search.hpp"
#include "darcynas/sensitivity.hpp"

namespace darcynas {

/// Parsed but untyped config: block -> key -> (value, line).
struct ConfigEntry {
    std::string value;
    int line = 0;
};
using ConfigBlock = std::map<std::string, ConfigEntry>;
using ConfigDocument = std::map<std::string, ConfigBlock>;

/// Thrown for malformed or inconsistent configuration; carries the line.
class ConfigError : public DomainError {
public:
    ConfigError(const std::string& what, int line)
        : DomainError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

ConfigDocument parse_config_document(std::istream& in);

enum class SolverMethod { Pinn, Fdm, Both };
std::string to_string(SolverMethod m);

struct SeedPlan {
    std::uint64_t master = 0;
    std::uint64_t field = 0;        // default master
    std::uint64_t collocation = 0;  // default master + 1000
    std::uint64_t init = 0;         // default master + 7
    std::uint64_t search = 0;       // default master + 31

    static SeedPlan from_master(std::uint64_t master);
};

struct ExperimentConfig {
    // problem
    Domain domain = canonical_domain(1);
    ManufacturedCase mms = canonical_case(1, SolutionFamily::SineOfSum);
    FieldSpec field;

    // solver
    SolverMethod method = SolverMethod::Pinn;
    int layers = 2;
    int neurons = 37;
    Activation activation = Activation::Tanh;
    TrainConfig train;
    std::optional<double> fdm_spacing;
    std::optional<std::array<int, 3>> fdm_counts;
    std::string pretrained;  // checkpoint for transfer rows; empty: matrix reference cell

    // matrix; empty lists mean "the field block value"
    std::vector<CorrelationKind> kinds;
    std::vector<double> variances;
    std::vector<int> modes;
    std::vector<bool> transfer{false};

    std::optional<NasOptions> nas;
    std::optional<PipelineOptions> sa;
    int screen_adam_iters = 500;

    SeedPlan seeds;
    std::string out_dir = "out";

    void validate() const;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

/// Field of the first matrix cell, seeded with seeds.field.
FieldSpec primary_field(const ExperimentConfig& config);
/// SA / NAS trainer setup on the primary field.
PinnNasSetup search_setup(const ExperimentConfig& config);
/// Screening objective on unit coordinates of `space`, backed by trainer.screen.
SaObjective screening_objective(const SearchSpace& space, const NasTrainer& trainer);

struct ResultRow {
    int dim = 1;
    CorrelationKind kind = CorrelationKind::Gaussian;
    double sigma2 = 0.1;
    int modes = 1000;
    bool transfer = false;
    std::string method;      // "pinn" or "fdm"
    double resolution = 0.0;  // FDM spacing (max over axes); 0 for PINN
    double delta_h = 0.0;
    double velocity_error = 0.0;  // PINN only
    int iterations = 0;
    double seconds = 0.0;  // written to timings.csv, not results.csv

    std::string cell() const;  // kind_s2_modes_tl tag used in file names
};

/// results/1 schema: comment line, header, rows (no wall-clock columns).
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& in);
std::vector<ResultRow> read_results_csv(const std::string& path);

struct ExperimentSummary {
    std::vector<ResultRow> rows;
    std::vector<std::string> failures;  // "cell: message"
    std::optional<NasResult> nas;
};

/// Runs the configured pipeline over every matrix cell and writes
/// results.csv, timings.csv, per-cell traces / grid files / plot data and,
/// when anything failed, failures.txt. `jobs` bounds concurrent cells.
ExperimentSummary run_experiment(const ExperimentConfig& config, int jobs = 1);

struct ComparisonRow {
    int dim = 1;
    CorrelationKind kind = CorrelationKind::Gaussian;
    double sigma2 = 0.0;
    int modes = 0;
    bool transfer = false;
    double pinn_delta_h = 0.0;
    double fdm_delta_h = 0.0;
    double fdm_resolution = 0.0;
    double ratio = 0.0;  // fdm / pinn
    double pinn_seconds = 0.0;
    double fdm_seconds = 0.0;
    std::optional<double> fdm_order;  // observed order over this key's FDM resolutions
};

/// Pairs every PINN row with the FDM rows of the same (dim, kind, sigma2,
/// modes) key; transfer rows share the FDM rows of their cell. Throws DomainError for empty inputs or unmatched keys.
std::vector<ComparisonRow> compare_report(const std::vector<ResultRow>& pinn_rows,
                                          const std::vector<ResultRow>& fdm_rows);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

}  // namespace darcynas
