// Command-line front end: synth | fit | ml | pca | diag.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sppca/errors.hpp"
#include "sppca/runner.hpp"
#include "sppca/version.hpp"

namespace {

void add_ingest_flags(CLI::App* cmd, sppca::RunConfig& config) {
    cmd->add_flag("--standardize", config.ingest.standardize,
                  "Standardize each column to zero mean, unit sd");
    cmd->add_flag("--transpose", config.ingest.transpose,
                  "Transpose the data matrix after ingestion");
    cmd->add_option("--drop-columns", config.ingest.drop_columns,
                    "Columns to drop, by header name or 0-based index")
        ->delimiter(',');
}

int report(const sppca::FitResult& result) {
    if (result.exit_code != 0) {
        std::fprintf(stderr, "error: %s\n", result.error_message.c_str());
    } else {
        for (const std::string& f : result.files_written)
            std::printf("wrote %s\n", f.c_str());
    }
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rotation-invariant Bayesian PPCA and GP-LVM sampler"};
    app.set_version_flag("--version", std::string(sppca::kVersion));
    app.require_subcommand(1);

    // synth
    sppca::SynthConfig synth;
    std::string synth_out = "synthetic.csv";
    std::string synth_truth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic factor data");
    synth_cmd->add_option("--n", synth.n, "Observations");
    synth_cmd->add_option("--d", synth.d, "Observed dimensions");
    synth_cmd->add_option("--q", synth.q, "Latent dimensions");
    synth_cmd->add_option("--sigma", synth.sigma, "Scales, strictly descending")
        ->delimiter(',');
    synth_cmd->add_option("--noise-sd", synth.noise_sd, "Observation noise sd");
    synth_cmd->add_option("--seed", synth.seed, "RNG seed")->required();
    synth_cmd->add_option("--out", synth_out, "Output CSV path");
    synth_cmd->add_option("--truth", synth_truth,
                          "Ground-truth JSON path (default: <out>.truth.json)");

    // fit
    sppca::RunConfig fit;
    std::string fit_model = "ppca-householder";
    CLI::App* fit_cmd = app.add_subcommand("fit", "Sample a posterior (or closed-form fit)");
    fit_cmd->add_option("--input", fit.input_path, "Input CSV")->required();
    fit_cmd->add_option("--output-dir", fit.output_dir, "Output directory")->required();
    fit_cmd->add_option("--model", fit_model,
                        "ppca-householder | ppca-standard | gplvm-householder | "
                        "gplvm-standard | ml | pca");
    fit_cmd->add_option("--q", fit.q, "Latent dimensions");
    fit_cmd->add_option("--chains", fit.sampler.chains, "Number of chains");
    fit_cmd->add_option("--warmup", fit.sampler.warmup, "Warmup iterations per chain");
    fit_cmd->add_option("--draws", fit.sampler.draws, "Posterior draws per chain");
    fit_cmd->add_option("--target-accept", fit.sampler.target_accept,
                        "Step size adaptation target");
    fit_cmd->add_option("--max-leapfrog", fit.sampler.max_leapfrog,
                        "Upper bound of the jittered leapfrog step count");
    fit_cmd->add_option("--seed", fit.sampler.seed, "RNG seed")->required();
    fit_cmd->add_option("--mu-sd", fit.priors.mu_sd, "Prior sd of the mean");
    std::string noise_prior = "lognormal";
    fit_cmd->add_option("--noise-prior", noise_prior, "lognormal | half-cauchy");
    fit_cmd->add_option("--half-cauchy-scale", fit.priors.half_cauchy_scale,
                        "Scale of the half-Cauchy noise prior");
    fit_cmd->add_option("--kernel-variance", fit.kernel.variance,
                        "Squared-exponential signal variance (gplvm)");
    fit_cmd->add_option("--lengthscale", fit.kernel.lengthscale,
                        "Squared-exponential lengthscale (gplvm)");
    fit_cmd->add_flag("--sample-kernel-hyperparams", fit.sample_kernel_hyperparams,
                      "Sample kernel sd and lengthscale instead of fixing them");
    fit_cmd->add_flag("--debug", fit.debug_draws,
                      "Also write raw unconstrained draws");
    add_ingest_flags(fit_cmd, fit);

    // ml / pca shortcuts
    sppca::RunConfig ml;
    CLI::App* ml_cmd = app.add_subcommand("ml", "Closed-form maximum-likelihood fit");
    ml_cmd->add_option("--input", ml.input_path, "Input CSV")->required();
    ml_cmd->add_option("--output-dir", ml.output_dir, "Output directory")->required();
    ml_cmd->add_option("--q", ml.q, "Latent dimensions");
    add_ingest_flags(ml_cmd, ml);

    sppca::RunConfig pca;
    CLI::App* pca_cmd = app.add_subcommand("pca", "Classical whitened PCA");
    pca_cmd->add_option("--input", pca.input_path, "Input CSV")->required();
    pca_cmd->add_option("--output-dir", pca.output_dir, "Output directory")->required();
    pca_cmd->add_option("--q", pca.q, "Latent dimensions");
    add_ingest_flags(pca_cmd, pca);

    // diag
    std::string diag_draws;
    std::string diag_out;
    CLI::App* diag_cmd =
        app.add_subcommand("diag", "Recompute diagnostics from a draws.csv");
    diag_cmd->add_option("--draws", diag_draws, "draws.csv produced by fit")->required();
    diag_cmd->add_option("--output-dir", diag_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            if (synth_truth.empty()) synth_truth = synth_out + ".truth.json";
            sppca::generate_synthetic(synth, synth_out, synth_truth);
            std::printf("wrote %s\nwrote %s\n", synth_out.c_str(), synth_truth.c_str());
            return 0;
        }
        if (*fit_cmd) {
            const auto kind = sppca::parse_model_kind(fit_model);
            if (!kind) {
                std::fprintf(stderr, "error: unknown model '%s'\n", fit_model.c_str());
                return 2;
            }
            fit.model = *kind;
            if (noise_prior == "half-cauchy")
                fit.priors.noise_prior = sppca::PriorConfig::NoisePrior::HalfCauchy;
            else if (noise_prior != "lognormal") {
                std::fprintf(stderr, "error: unknown noise prior '%s'\n",
                             noise_prior.c_str());
                return 2;
            }
            return report(sppca::run_fit(fit));
        }
        if (*ml_cmd) {
            ml.model = sppca::ModelKind::Ml;
            return report(sppca::run_fit(ml));
        }
        if (*pca_cmd) {
            pca.model = sppca::ModelKind::Pca;
            return report(sppca::run_fit(pca));
        }
        if (*diag_cmd) return report(sppca::run_diag(diag_draws, diag_out));
    } catch (const sppca::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
