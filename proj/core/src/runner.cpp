#include "sppca/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "json.hpp"
#include "sppca/baselines.hpp"
#include "sppca/csv.hpp"
#include "sppca/errors.hpp"
#include "sppca/version.hpp"

namespace sppca {

namespace fs = std::filesystem;
using nlohmann::json;

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::PpcaHouseholder: return "ppca-householder";
        case ModelKind::PpcaStandard: return "ppca-standard";
        case ModelKind::GplvmHouseholder: return "gplvm-householder";
        case ModelKind::GplvmStandard: return "gplvm-standard";
        case ModelKind::Ml: return "ml";
        case ModelKind::Pca: return "pca";
    }
    return "unknown";
}

std::optional<ModelKind> parse_model_kind(const std::string& name) {
    if (name == "ppca-householder" || name == "householder")
        return ModelKind::PpcaHouseholder;
    if (name == "ppca-standard" || name == "standard") return ModelKind::PpcaStandard;
    if (name == "gplvm-householder" || name == "gplvm")
        return ModelKind::GplvmHouseholder;
    if (name == "gplvm-standard") return ModelKind::GplvmStandard;
    if (name == "ml") return ModelKind::Ml;
    if (name == "pca") return ModelKind::Pca;
    return std::nullopt;
}

std::size_t threads_from_env() {
    const char* raw = std::getenv("STIEFEL_PPCA_THREADS");
    if (!raw || !*raw) return 0;
    std::size_t value = 0;
    const char* end = raw;
    while (*end) ++end;
    auto [ptr, ec] = std::from_chars(raw, end, value);
    if (ec != std::errc{} || ptr != end) return 0;
    return value;
}

DenseMatrix ingest_csv(const std::string& path, const IngestOptions& options) {
    CsvTable table = read_csv(path);

    std::vector<bool> drop(table.values.cols, false);
    for (const std::string& spec : options.drop_columns) {
        std::size_t index = table.values.cols;
        if (table.had_header) {
            for (std::size_t c = 0; c < table.header.size(); ++c)
                if (table.header[c] == spec) {
                    index = c;
                    break;
                }
        }
        if (index == table.values.cols) {
            std::size_t parsed = 0;
            auto [ptr, ec] =
                std::from_chars(spec.data(), spec.data() + spec.size(), parsed);
            if (ec == std::errc{} && ptr == spec.data() + spec.size() &&
                parsed < table.values.cols)
                index = parsed;
        }
        if (index == table.values.cols)
            throw Error("ingest_csv: no column named or indexed '" + spec + "'");
        drop[index] = true;
    }

    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < table.values.cols; ++c)
        if (!drop[c]) keep.push_back(c);
    if (keep.empty()) throw Error("ingest_csv: all columns dropped");

    DenseMatrix m(table.values.rows, keep.size());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < keep.size(); ++c) m(r, c) = table.values(r, keep[c]);

    if (options.standardize) {
        const double n = static_cast<double>(m.rows);
        for (std::size_t c = 0; c < m.cols; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < m.rows; ++r) mean += m(r, c);
            mean /= n;
            double var = 0.0;
            for (std::size_t r = 0; r < m.rows; ++r) {
                const double dlt = m(r, c) - mean;
                var += dlt * dlt;
            }
            var /= n;
            const double sd = std::sqrt(var);
            if (sd < 1e-12)
                throw ConstantColumn("ingest_csv: column " + std::to_string(c) +
                                     " is constant, cannot standardize");
            for (std::size_t r = 0; r < m.rows; ++r) m(r, c) = (m(r, c) - mean) / sd;
        }
    }
    if (options.transpose) m = transpose(m);
    return m;
}

namespace {

json matrix_to_json(const DenseMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json finite_or_null(double v) {
    if (std::isfinite(v)) return json(v);
    return json(nullptr);
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace

void generate_synthetic(const SynthConfig& config, const std::string& out_csv,
                        const std::string& truth_json) {
    if (config.sigma.size() != config.q)
        throw DimensionMismatch("generate_synthetic: sigma length must equal Q");
    for (std::size_t i = 0; i + 1 < config.sigma.size(); ++i)
        if (!(config.sigma[i] > config.sigma[i + 1]))
            throw Error("generate_synthetic: sigma must be strictly descending");
    if (!(config.sigma.back() > 0.0))
        throw Error("generate_synthetic: sigma must be positive");

    RandomStream rng(config.seed);
    const HouseholderChain chain = HouseholderChain::random(config.d, config.q, rng);
    const DenseMatrix u = fix_signs(apply_chain(chain).U).U;
    DenseMatrix w = u;
    for (std::size_t i = 0; i < config.d; ++i)
        for (std::size_t j = 0; j < config.q; ++j) w(i, j) *= config.sigma[j];

    DenseMatrix x(config.n, config.q);
    for (double& v : x.data) v = rng.normal();
    DenseMatrix y = matmul(x, transpose(w));
    for (double& v : y.data) v += config.noise_sd * rng.normal();

    std::vector<std::string> header(config.d);
    for (std::size_t j = 0; j < config.d; ++j) header[j] = "y" + std::to_string(j);
    write_csv(out_csv, header, y);

    json truth;
    truth["n"] = config.n;
    truth["d"] = config.d;
    truth["q"] = config.q;
    truth["sigma"] = config.sigma;
    truth["noise_sd"] = config.noise_sd;
    truth["seed"] = config.seed;
    truth["U"] = matrix_to_json(u);
    truth["W"] = matrix_to_json(w);
    write_json_file(truth_json, truth);
}

namespace {

struct DecodedDraws {
    std::vector<std::string> names;
    std::vector<DenseMatrix> per_chain;  // draws x params
};

// Scale recovery for free-form draws: singular values of the draw via the
// eigenvalues of its Q x Q Gram matrix, descending.
DenseVector singular_values_of(const DenseMatrix& m) {
    const SymEigen eig = sym_eigen(gram(m));
    DenseVector s(eig.values.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = std::sqrt(std::max(eig.values[i], 0.0));
    return s;
}

std::vector<std::string> loading_names(std::size_t d, std::size_t q,
                                       const std::string& stem) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < q; ++j)
            names.push_back(stem + "_" + std::to_string(i) + "_" + std::to_string(j));
    return names;
}

// Starting points seeded at the closed-form solution, so warmup only has to
// tune step size and mass instead of first locating the posterior bulk. The
// chains are nudged apart with RNG streams disjoint from the sampling
// streams, keeping cross-chain diagnostics meaningful and the whole run
// reproducible from (seed, chains). Any failure (rank deficiency, tied
// scales, Q = D) falls back to the sampler's own random initialization.
std::vector<DenseVector> seeded_inits(const DenseMatrix& data, std::size_t q,
                                      const SamplerConfig& sampler,
                                      const PpcaHouseholderPosterior* hh,
                                      const PpcaStandardPosterior* st) {
    try {
        const MlPpcaSolution sol = fit_ml_ppca(PpcaData(data), q);
        const double log_noise = 0.5 * std::log(std::max(sol.noise_var_ml, 1e-10));
        ParamVector theta;
        if (hh) {
            const std::size_t d = hh->d();
            DenseVector sigma(q);
            DenseMatrix u(d, q);
            for (std::size_t j = 0; j < q; ++j) {
                double nrm = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    nrm += sol.W_ml(i, j) * sol.W_ml(i, j);
                nrm = std::sqrt(nrm);
                if (!(nrm > 0.0)) throw Error("degenerate loading column");
                sigma[j] = nrm;
                for (std::size_t i = 0; i < d; ++i) u(i, j) = sol.W_ml(i, j) / nrm;
            }
            PpcaParamsHouseholder params;
            params.chain = chain_from_frame(u);
            // The pivots come out unit norm and only their directions matter;
            // rescaling them to the prior-typical length costs nothing and
            // starts the norm coordinates where their chi prior wants them.
            for (std::size_t k = 0; k < params.chain.vs.size(); ++k) {
                const double scale = std::sqrt(static_cast<double>(d - k));
                for (double& x : params.chain.vs[k]) x *= scale;
            }
            params.y_sigma = ordered_inverse(OrderedSingularValues{sigma});
            params.mu = sol.mu_ml;
            params.log_noise = log_noise;
            theta = hh->pack(params);
        } else {
            PpcaParamsStandard params;
            params.W = sol.W_ml;
            params.mu = sol.mu_ml;
            params.log_noise = log_noise;
            theta = st->pack(params);
        }
        std::vector<DenseVector> inits(sampler.chains);
        for (std::size_t c = 0; c < sampler.chains; ++c) {
            RandomStream rng(sampler.seed, sampler.chains + c);
            DenseVector point = theta;
            for (double& x : point) x += rng.uniform(-0.01, 0.01);
            inits[c] = std::move(point);
        }
        return inits;
    } catch (const Error&) {
        return {};
    }
}

DecodedDraws decode_ppca_householder(const PpcaHouseholderPosterior& posterior,
                                     const std::vector<ChainOutput>& chains) {
    const std::size_t d = posterior.d();
    const std::size_t q = posterior.q();
    DecodedDraws out;
    out.names = loading_names(d, q, "W");
    for (std::size_t j = 0; j < q; ++j)
        out.names.push_back("sigma_" + std::to_string(j + 1));
    for (std::size_t i = 0; i < d; ++i)
        out.names.push_back("mu_" + std::to_string(i + 1));
    out.names.push_back("sigma_noise");

    for (const ChainOutput& chain : chains) {
        DenseMatrix rows(chain.draws.rows, out.names.size());
        for (std::size_t k = 0; k < chain.draws.rows; ++k) {
            std::span<const double> theta(&chain.draws.data[k * chain.draws.cols],
                                          chain.draws.cols);
            auto dec = posterior.decode(theta);
            const DenseMatrix u = fix_signs(dec.U).U;
            std::size_t pos = 0;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < q; ++j)
                    rows(k, pos++) = u(i, j) * dec.sigma[j];
            for (std::size_t j = 0; j < q; ++j) rows(k, pos++) = dec.sigma[j];
            for (std::size_t i = 0; i < d; ++i) rows(k, pos++) = dec.mu[i];
            rows(k, pos) = dec.sigma_noise;
        }
        out.per_chain.push_back(std::move(rows));
    }
    return out;
}

DecodedDraws decode_ppca_standard(const PpcaStandardPosterior& posterior,
                                  const std::vector<ChainOutput>& chains) {
    const std::size_t d = posterior.d();
    const std::size_t q = posterior.q();
    DecodedDraws out;
    out.names = loading_names(d, q, "W");
    for (std::size_t j = 0; j < q; ++j)
        out.names.push_back("sigma_" + std::to_string(j + 1));
    for (std::size_t i = 0; i < d; ++i)
        out.names.push_back("mu_" + std::to_string(i + 1));
    out.names.push_back("sigma_noise");

    for (const ChainOutput& chain : chains) {
        DenseMatrix rows(chain.draws.rows, out.names.size());
        for (std::size_t k = 0; k < chain.draws.rows; ++k) {
            std::span<const double> theta(&chain.draws.data[k * chain.draws.cols],
                                          chain.draws.cols);
            const PpcaParamsStandard p = posterior.unpack(theta);
            const DenseVector sv = singular_values_of(p.W);
            std::size_t pos = 0;
            for (std::size_t i = 0; i < d * q; ++i) rows(k, pos++) = p.W.data[i];
            for (std::size_t j = 0; j < q; ++j) rows(k, pos++) = sv[j];
            for (std::size_t i = 0; i < d; ++i) rows(k, pos++) = p.mu[i];
            rows(k, pos) = std::exp(p.log_noise);
        }
        out.per_chain.push_back(std::move(rows));
    }
    return out;
}

DecodedDraws decode_gplvm_householder(const GplvmHouseholderPosterior& posterior,
                                      const std::vector<ChainOutput>& chains) {
    const std::size_t n = posterior.n();
    const std::size_t q = posterior.q();
    DecodedDraws out;
    out.names = loading_names(n, q, "X");
    for (std::size_t j = 0; j < q; ++j)
        out.names.push_back("sigma_" + std::to_string(j + 1));
    out.names.push_back("sigma_noise");
    if (posterior.samples_kernel_hyperparams()) {
        out.names.push_back("kernel_sd");
        out.names.push_back("lengthscale");
    }

    for (const ChainOutput& chain : chains) {
        DenseMatrix rows(chain.draws.rows, out.names.size());
        for (std::size_t k = 0; k < chain.draws.rows; ++k) {
            std::span<const double> theta(&chain.draws.data[k * chain.draws.cols],
                                          chain.draws.cols);
            auto dec = posterior.decode(theta);
            const DenseMatrix u = fix_signs(dec.U).U;
            std::size_t pos = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j)
                    rows(k, pos++) = u(i, j) * dec.sigma[j];
            for (std::size_t j = 0; j < q; ++j) rows(k, pos++) = dec.sigma[j];
            rows(k, pos++) = dec.sigma_noise;
            if (posterior.samples_kernel_hyperparams()) {
                rows(k, pos++) = std::sqrt(dec.kernel.variance);
                rows(k, pos) = dec.kernel.lengthscale;
            }
        }
        out.per_chain.push_back(std::move(rows));
    }
    return out;
}

DecodedDraws decode_gplvm_standard(const GplvmStandardPosterior& posterior,
                                   const std::vector<ChainOutput>& chains) {
    const std::size_t n = posterior.n();
    const std::size_t q = posterior.q();
    DecodedDraws out;
    out.names = loading_names(n, q, "X");
    for (std::size_t j = 0; j < q; ++j)
        out.names.push_back("sigma_" + std::to_string(j + 1));
    out.names.push_back("sigma_noise");

    for (const ChainOutput& chain : chains) {
        DenseMatrix rows(chain.draws.rows, out.names.size());
        for (std::size_t k = 0; k < chain.draws.rows; ++k) {
            std::span<const double> theta(&chain.draws.data[k * chain.draws.cols],
                                          chain.draws.cols);
            const DenseMatrix x = posterior.decode_x(theta);
            const DenseVector sv = singular_values_of(x);
            std::size_t pos = 0;
            for (std::size_t i = 0; i < n * q; ++i) rows(k, pos++) = x.data[i];
            for (std::size_t j = 0; j < q; ++j) rows(k, pos++) = sv[j];
            rows(k, pos) = std::exp(theta[n * q]);
        }
        out.per_chain.push_back(std::move(rows));
    }
    return out;
}

void write_draws_csv(const std::string& path, const DecodedDraws& decoded,
                     const std::vector<ChainOutput>& chains) {
    std::vector<std::string> header = {"chain", "draw", "logp"};
    header.insert(header.end(), decoded.names.begin(), decoded.names.end());

    std::size_t total_rows = 0;
    for (const auto& m : decoded.per_chain) total_rows += m.rows;
    DenseMatrix table(total_rows, header.size());
    std::size_t row = 0;
    for (std::size_t c = 0; c < decoded.per_chain.size(); ++c) {
        const DenseMatrix& m = decoded.per_chain[c];
        for (std::size_t k = 0; k < m.rows; ++k, ++row) {
            table(row, 0) = static_cast<double>(c);
            table(row, 1) = static_cast<double>(k);
            table(row, 2) = chains[c].log_densities[k];
            for (std::size_t j = 0; j < m.cols; ++j) table(row, 3 + j) = m(k, j);
        }
    }
    write_csv(path, header, table);
}

void write_raw_draws_csv(const std::string& path,
                         const std::vector<ChainOutput>& chains) {
    if (chains.empty()) return;
    const std::size_t dim = chains[0].draws.cols;
    std::vector<std::string> header = {"chain", "draw", "logp"};
    for (std::size_t i = 0; i < dim; ++i) header.push_back("theta_" + std::to_string(i));

    std::size_t total_rows = 0;
    for (const auto& c : chains) total_rows += c.draws.rows;
    DenseMatrix table(total_rows, header.size());
    std::size_t row = 0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t k = 0; k < chains[c].draws.rows; ++k, ++row) {
            table(row, 0) = static_cast<double>(c);
            table(row, 1) = static_cast<double>(k);
            table(row, 2) = chains[c].log_densities[k];
            for (std::size_t j = 0; j < dim; ++j) table(row, 3 + j) = chains[c].draws(k, j);
        }
    }
    write_csv(path, header, table);
}

void write_summary_files(const std::string& dir,
                         const std::vector<ParameterSummary>& summary,
                         std::vector<std::string>& files) {
    json js;
    for (const ParameterSummary& s : summary) {
        js[s.name] = {
            {"mean", finite_or_null(s.mean)}, {"sd", finite_or_null(s.sd)},
            {"q2_5", finite_or_null(s.q2_5)}, {"q50", finite_or_null(s.q50)},
            {"q97_5", finite_or_null(s.q97_5)}, {"rhat", finite_or_null(s.rhat)},
            {"ess", finite_or_null(s.ess)},
        };
    }
    const std::string json_path = dir + "/summary.json";
    write_json_file(json_path, js);
    files.push_back(json_path);

    DenseMatrix table(summary.size(), 7);
    for (std::size_t i = 0; i < summary.size(); ++i) {
        table(i, 0) = summary[i].mean;
        table(i, 1) = summary[i].sd;
        table(i, 2) = summary[i].q2_5;
        table(i, 3) = summary[i].q50;
        table(i, 4) = summary[i].q97_5;
        table(i, 5) = summary[i].rhat;
        table(i, 6) = summary[i].ess;
    }
    const std::string csv_path = dir + "/summary.csv";
    std::ofstream out(csv_path);
    if (!out) throw Error("cannot open " + csv_path + " for writing");
    out << "parameter,mean,sd,q2_5,q50,q97_5,rhat,ess\n";
    char buf[40];
    for (std::size_t i = 0; i < summary.size(); ++i) {
        out << summary[i].name;
        for (std::size_t j = 0; j < 7; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", table(i, j));
            out << "," << buf;
        }
        out << "\n";
    }
    files.push_back(csv_path);
}

void write_diagnostics_file(const std::string& dir,
                            const std::vector<ChainOutput>& chains,
                            const std::vector<ParameterSummary>& summary,
                            std::vector<std::string>& files) {
    json js;
    json per_chain = json::array();
    for (const ChainOutput& c : chains) {
        double mean_accept = 0.0;
        for (double a : c.accept_stats) mean_accept += a;
        if (!c.accept_stats.empty()) mean_accept /= static_cast<double>(c.accept_stats.size());
        double mean_steps = 0.0;
        for (std::uint32_t s : c.leapfrog_counts) mean_steps += s;
        if (!c.leapfrog_counts.empty())
            mean_steps /= static_cast<double>(c.leapfrog_counts.size());
        per_chain.push_back({
            {"chain", c.chain_index},
            {"divergences", c.divergences},
            {"step_size", c.adapted_step_size},
            {"mean_accept", mean_accept},
            {"mean_leapfrog_steps", mean_steps},
        });
    }
    js["chains"] = std::move(per_chain);

    double max_rhat = 0.0;
    double min_ess = std::numeric_limits<double>::infinity();
    bool have = false;
    for (const ParameterSummary& s : summary) {
        if (std::isfinite(s.rhat)) {
            max_rhat = std::max(max_rhat, s.rhat);
            have = true;
        }
        if (std::isfinite(s.ess)) min_ess = std::min(min_ess, s.ess);
    }
    js["max_rhat"] = have ? finite_or_null(max_rhat) : json(nullptr);
    js["min_ess"] = std::isfinite(min_ess) ? finite_or_null(min_ess) : json(nullptr);

    const std::string path = dir + "/diagnostics.json";
    write_json_file(path, js);
    files.push_back(path);
}

}  // namespace

FitResult run_fit(const RunConfig& config) {
    FitResult result;
    const auto t_start = std::chrono::steady_clock::now();
    try {
        fs::create_directories(config.output_dir);
        const DenseMatrix data = ingest_csv(config.input_path, config.ingest);

        json meta;
        meta["version"] = kVersion;
        meta["schema_version"] = kOutputSchemaVersion;
        meta["model"] = model_kind_name(config.model);
        meta["input"] = config.input_path;
        meta["rows"] = data.rows;
        meta["cols"] = data.cols;
        meta["q"] = config.q;
        meta["standardize"] = config.ingest.standardize;
        meta["transpose"] = config.ingest.transpose;
        meta["drop_columns"] = config.ingest.drop_columns;

        if (config.model == ModelKind::Ml) {
            const MlPpcaSolution sol = fit_ml_ppca(PpcaData(data), config.q);
            json js;
            js["mu_ml"] = sol.mu_ml;
            js["W_ml"] = matrix_to_json(sol.W_ml);
            js["noise_var_ml"] = sol.noise_var_ml;
            js["eigvals"] = sol.eigvals;
            js["q"] = sol.q;
            const std::string path = config.output_dir + "/ml_solution.json";
            write_json_file(path, js);
            result.files_written.push_back(path);
        } else if (config.model == ModelKind::Pca) {
            const ClassicalPca sol = classical_pca(data, config.q);
            json js;
            js["components"] = matrix_to_json(sol.components);
            js["eigvals"] = sol.eigvals;
            js["mu"] = sol.mu;
            const std::string path = config.output_dir + "/pca_solution.json";
            write_json_file(path, js);
            result.files_written.push_back(path);
            std::vector<std::string> header(sol.projections.cols);
            for (std::size_t j = 0; j < header.size(); ++j)
                header[j] = "x" + std::to_string(j);
            const std::string proj = config.output_dir + "/pca_projections.csv";
            write_csv(proj, header, sol.projections);
            result.files_written.push_back(proj);
        } else {
            SamplerConfig sampler = config.sampler;
            const std::size_t env_threads = threads_from_env();
            if (env_threads > 0) {
                sampler.max_threads = sampler.max_threads == 0
                                          ? env_threads
                                          : std::min(sampler.max_threads, env_threads);
            }

            std::unique_ptr<ModelPosterior> posterior;
            const PpcaHouseholderPosterior* ppca_hh = nullptr;
            const PpcaStandardPosterior* ppca_std = nullptr;
            const GplvmHouseholderPosterior* gplvm_hh = nullptr;
            const GplvmStandardPosterior* gplvm_std = nullptr;
            switch (config.model) {
                case ModelKind::PpcaHouseholder: {
                    auto p = std::make_unique<PpcaHouseholderPosterior>(
                        PpcaData(data), config.q, config.priors);
                    ppca_hh = p.get();
                    posterior = std::move(p);
                    break;
                }
                case ModelKind::PpcaStandard: {
                    auto p = std::make_unique<PpcaStandardPosterior>(
                        PpcaData(data), config.q, config.priors);
                    ppca_std = p.get();
                    posterior = std::move(p);
                    break;
                }
                case ModelKind::GplvmHouseholder: {
                    auto p = std::make_unique<GplvmHouseholderPosterior>(
                        GplvmData(data), config.q, config.kernel, config.priors,
                        config.sample_kernel_hyperparams);
                    gplvm_hh = p.get();
                    posterior = std::move(p);
                    break;
                }
                case ModelKind::GplvmStandard: {
                    auto p = std::make_unique<GplvmStandardPosterior>(
                        GplvmData(data), config.q, config.kernel, config.priors);
                    gplvm_std = p.get();
                    posterior = std::move(p);
                    break;
                }
                default: break;
            }

            std::vector<DenseVector> inits;
            if (ppca_hh || ppca_std)
                inits = seeded_inits(data, config.q, sampler, ppca_hh, ppca_std);
            const std::vector<ChainOutput> chains =
                run_chains(*posterior, sampler, inits);

            DecodedDraws decoded;
            if (ppca_hh) decoded = decode_ppca_householder(*ppca_hh, chains);
            else if (ppca_std) decoded = decode_ppca_standard(*ppca_std, chains);
            else if (gplvm_hh) decoded = decode_gplvm_householder(*gplvm_hh, chains);
            else decoded = decode_gplvm_standard(*gplvm_std, chains);

            const std::string draws_path = config.output_dir + "/draws.csv";
            write_draws_csv(draws_path, decoded, chains);
            result.files_written.push_back(draws_path);
            if (config.debug_draws) {
                const std::string raw_path = config.output_dir + "/raw_draws.csv";
                write_raw_draws_csv(raw_path, chains);
                result.files_written.push_back(raw_path);
            }

            result.summary = summarize(decoded.per_chain, decoded.names);
            result.parameter_names = decoded.names;
            write_summary_files(config.output_dir, result.summary, result.files_written);
            write_diagnostics_file(config.output_dir, chains, result.summary,
                                   result.files_written);
            for (const ChainOutput& c : chains) result.total_divergences += c.divergences;

            meta["init"] = inits.empty() ? "random" : "ml";
            meta["chains"] = sampler.chains;
            meta["warmup"] = sampler.warmup;
            meta["draws"] = sampler.draws;
            meta["target_accept"] = sampler.target_accept;
            meta["max_leapfrog"] = sampler.max_leapfrog;
            meta["seed"] = sampler.seed;
            meta["threads"] = sampler.max_threads;
            meta["mu_sd"] = config.priors.mu_sd;
            meta["noise_prior"] =
                config.priors.noise_prior == PriorConfig::NoisePrior::LogNormal
                    ? "lognormal"
                    : "half-cauchy";
            if (config.model == ModelKind::GplvmHouseholder ||
                config.model == ModelKind::GplvmStandard) {
                meta["kernel"] = {{"variance", config.kernel.variance},
                                  {"lengthscale", config.kernel.lengthscale},
                                  {"sample_hyperparams", config.sample_kernel_hyperparams}};
            }
        }

        const auto t_end = std::chrono::steady_clock::now();
        meta["wall_time_seconds"] =
            std::chrono::duration<double>(t_end - t_start).count();
        const std::string meta_path = config.output_dir + "/metadata.json";
        write_json_file(meta_path, meta);
        result.files_written.push_back(meta_path);
    } catch (const Error& e) {
        result.exit_code = 1;
        result.error_message = e.what();
        try {
            fs::create_directories(config.output_dir);
            json js;
            js["error"] = e.what();
            write_json_file(config.output_dir + "/error.json", js);
        } catch (...) {
        }
    }
    return result;
}

FitResult run_diag(const std::string& draws_csv, const std::string& output_dir) {
    FitResult result;
    try {
        fs::create_directories(output_dir);
        const CsvTable table = read_csv(draws_csv);
        if (!table.had_header || table.header.size() < 4 || table.header[0] != "chain" ||
            table.header[1] != "draw" || table.header[2] != "logp")
            throw Error("run_diag: " + draws_csv +
                        " does not look like a draws file (chain,draw,logp,...)");

        std::size_t n_chains = 0;
        for (std::size_t r = 0; r < table.values.rows; ++r)
            n_chains = std::max(n_chains,
                                static_cast<std::size_t>(table.values(r, 0)) + 1);

        const std::size_t n_params = table.header.size() - 3;
        std::vector<std::size_t> counts(n_chains, 0);
        for (std::size_t r = 0; r < table.values.rows; ++r)
            ++counts[static_cast<std::size_t>(table.values(r, 0))];

        std::vector<DenseMatrix> per_chain(n_chains);
        for (std::size_t c = 0; c < n_chains; ++c)
            per_chain[c] = DenseMatrix(counts[c], n_params);
        std::vector<std::size_t> filled(n_chains, 0);
        for (std::size_t r = 0; r < table.values.rows; ++r) {
            const std::size_t c = static_cast<std::size_t>(table.values(r, 0));
            const std::size_t k = filled[c]++;
            for (std::size_t j = 0; j < n_params; ++j)
                per_chain[c](k, j) = table.values(r, 3 + j);
        }

        std::vector<std::string> names(table.header.begin() + 3, table.header.end());
        result.summary = summarize(per_chain, names);
        result.parameter_names = std::move(names);
        write_summary_files(output_dir, result.summary, result.files_written);

        json js;
        js["source"] = draws_csv;
        js["chains"] = n_chains;
        double max_rhat = 0.0;
        bool have = false;
        for (const ParameterSummary& s : result.summary)
            if (std::isfinite(s.rhat)) {
                max_rhat = std::max(max_rhat, s.rhat);
                have = true;
            }
        js["max_rhat"] = have ? finite_or_null(max_rhat) : json(nullptr);
        write_json_file(output_dir + "/diagnostics.json", js);
        result.files_written.push_back(output_dir + "/diagnostics.json");
    } catch (const Error& e) {
        result.exit_code = 1;
        result.error_message = e.what();
        try {
            fs::create_directories(output_dir);
            json js;
            js["error"] = e.what();
            write_json_file(output_dir + "/error.json", js);
        } catch (...) {
        }
    }
    return result;
}

}  // namespace sppca
