#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sppca/diagnostics.hpp"
#include "sppca/gplvm.hpp"
#include "sppca/hmc.hpp"
#include "sppca/ppca.hpp"
#include "sppca/tensor.hpp"

namespace sppca {

enum class ModelKind {
    PpcaHouseholder,
    PpcaStandard,
    GplvmHouseholder,
    GplvmStandard,
    Ml,
    Pca,
};

std::string model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(const std::string& name);

struct IngestOptions {
    bool standardize = false;
    bool transpose = false;
    std::vector<std::string> drop_columns;  // names (with header) or 0-based indices
};

// Loads a numeric CSV and applies, in order: column drops, per-column
// standardization to zero mean and unit (population) standard deviation,
// transposition. Standardizing a constant column raises ConstantColumn.
DenseMatrix ingest_csv(const std::string& path, const IngestOptions& options);

struct SynthConfig {
    std::size_t n = 150;
    std::size_t d = 5;
    std::size_t q = 2;
    DenseVector sigma = {3.0, 1.0};
    double noise_sd = 0.01;
    std::uint64_t seed = 1;
};

// Samples a frame uniformly (via a Gaussian Householder chain, sign-fixed),
// scales it by sigma, and writes Y = X W^T + E to out_csv along with the
// generating parameters as JSON.
void generate_synthetic(const SynthConfig& config, const std::string& out_csv,
                        const std::string& truth_json);

struct RunConfig {
    std::string input_path;
    std::string output_dir;
    ModelKind model = ModelKind::PpcaHouseholder;
    std::size_t q = 2;
    SamplerConfig sampler;
    PriorConfig priors;
    SeKernelConfig kernel;
    bool sample_kernel_hyperparams = false;
    IngestOptions ingest;
    bool debug_draws = false;  // additionally dump raw unconstrained draws
};

struct FitResult {
    int exit_code = 0;
    std::string error_message;
    std::vector<ParameterSummary> summary;
    std::vector<std::string> parameter_names;
    std::size_t total_divergences = 0;
    std::vector<std::string> files_written;
};

// End-to-end fit: ingest, build the posterior, sample (thread count capped
// by the STIEFEL_PPCA_THREADS environment variable when set), postprocess
// (sign fixing, scale recovery), and write draws.csv, summary.csv,
// summary.json, diagnostics.json, and metadata.json into output_dir.
// ModelKind::Ml and ModelKind::Pca skip sampling and write their closed-form
// solutions instead. Library errors are captured into error.json and a
// non-zero exit code rather than thrown.
FitResult run_fit(const RunConfig& config);

// Recomputes summary and convergence diagnostics from a draws.csv produced
// by run_fit.
FitResult run_diag(const std::string& draws_csv, const std::string& output_dir);

// Thread cap from STIEFEL_PPCA_THREADS (unset, empty, or unparsable: 0,
// meaning no cap beyond hardware concurrency).
std::size_t threads_from_env();

}  // namespace sppca
