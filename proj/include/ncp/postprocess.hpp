#pragma once

#include <vector>

#include "ncp/datasets.hpp"
#include "ncp/matrix.hpp"
#include "ncp/trainer.hpp"

namespace ncp {

enum class FeatureMode { Raw, Centered, Whitened };

// A fitted model plus the linear recalibration applied to its features at
// inference time. In raw and centered modes the transforms are the
// permutation that sorts sigma descending; whitened mode carries the
// whitening maps and the refreshed singular values.
struct WhitenedModel {
    FittedModel base;
    Matrix u_transform;             // d x d, applied to feature rows on the right
    Matrix v_transform;             // d x d
    std::vector<double> new_sigma;  // nonincreasing, in [0, 1]
    FeatureMode mode = FeatureMode::Raw;
};

WhitenedModel as_raw(FittedModel fitted);

// Centering only: inference subtracts the stored training feature means, so
// the deflated term averages to zero over the retained sample.
WhitenedModel center(FittedModel fitted);

// Centers features with the stored training means, scales columns by
// sqrt(sigma), forms the 1/n covariances on `data`, and rotates both sides
// into the basis where the cross-covariance is diagonal. Requires at least d
// rows. eps ridges both covariances before the inverse square root.
WhitenedModel whiten(FittedModel fitted, const SampleSet& data, double eps = 1e-6);

struct WhitenResult {
    Matrix u_transform, v_transform;
    std::vector<double> new_sigma;
};

// Core of whiten() on prepared feature matrices (already centered and
// sqrt-sigma-scaled). Exposed so recalibration can be tested and re-applied
// without a network in the loop.
WhitenResult whiten_features(const Matrix& psi_u, const Matrix& psi_v, double eps);

}  // namespace ncp
