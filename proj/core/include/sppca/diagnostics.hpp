#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sppca/tensor.hpp"

namespace sppca {

// Resolves the per-column sign ambiguity of a frame draw: any column whose
// first entry is negative is flipped so the first entry is positive. Columns
// whose first entry is smaller than 1e-12 in magnitude are left alone and
// flagged ambiguous instead of being forced either way.
struct SignFixResult {
    DenseMatrix U;
    std::vector<bool> flipped;
    std::vector<bool> ambiguous;
};

SignFixResult fix_signs(const DenseMatrix& u);

// Split-half potential scale reduction factor for one scalar parameter.
// Chains are truncated to the shortest length (must be >= 4) and split in
// half; returns 1.0 exactly when the half-chains have no between variance
// left to measure.
double split_rhat(const std::vector<DenseVector>& chains);

// Effective sample size via pairwise (Geyer) truncated autocorrelations,
// combined across chains. Constant chains are reported as degenerate with
// ess = 0. The estimate is capped at 1.05 x (total draws).
struct EssResult {
    double ess = 0.0;
    bool degenerate = false;
};

EssResult ess_bulk(const std::vector<DenseVector>& chains);

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q2_5 = 0.0;
    double q50 = 0.0;
    double q97_5 = 0.0;
    double rhat = 0.0;  // NaN when not computable (single short chain)
    double ess = 0.0;   // NaN when not computable
};

// Summarizes per-chain draw matrices (draws x params, one matrix per chain,
// already decoded and sign-fixed). names.size() must equal the column count.
std::vector<ParameterSummary> summarize(const std::vector<DenseMatrix>& chain_draws,
                                        const std::vector<std::string>& names);

}  // namespace sppca
